import math

import numpy as np
import pytest

import esgeo as eg
from esgeo.athermality import InfeasibleRegionError
from conftest import random_passive_state, random_spectrum


def test_inversion_recovers_gibbs(h012):
    for beta in (0.2, 0.9, 3.0):
        g = eg.gibbs_state(h012, beta)
        e, s = eg.macro_point(g)
        w = eg.qutrit_state_from_macro(h012, e, s)
        assert np.allclose(w.probs, g.probs, atol=1e-9)


def test_inversion_reference_roundtrip(h012, reference_qutrit):
    e, s = eg.macro_point(reference_qutrit)
    assert e == pytest.approx(0.65, abs=1e-12)
    w = eg.qutrit_state_from_macro(h012, e, s)
    assert np.allclose(w.probs, [0.45, 0.45, 0.1], atol=1e-9)


def test_inversion_boundary_uniform(h012):
    w = eg.qutrit_state_from_macro(h012, 1.0, math.log(3))
    assert np.allclose(w.probs, 1 / 3, atol=1e-9)


def test_inversion_random_roundtrip():
    rng = np.random.default_rng(51)
    for _ in range(100):
        spec = random_spectrum(rng, 3)
        state = random_passive_state(rng, spec, floor=1e-6)
        e, s = eg.macro_point(state)
        w = eg.qutrit_state_from_macro(spec, e, s, branch="near", near=state.probs)
        assert np.allclose(w.probs, state.probs, atol=1e-8)
        ew, sw = eg.macro_point(w)
        assert abs(ew - e) < 1e-10 and abs(sw - s) < 1e-10


def test_inversion_two_branches(h012):
    # close under the thermal curve both fiber sides carry a passive state
    wp = eg.qutrit_state_from_macro(h012, 0.65, 0.99, branch="plus")
    wm = eg.qutrit_state_from_macro(h012, 0.65, 0.99, branch="minus")
    assert not np.allclose(wp.probs, wm.probs, atol=1e-6)
    for w in (wp, wm):
        e, s = eg.macro_point(w)
        assert e == pytest.approx(0.65, abs=1e-10)
        assert s == pytest.approx(0.99, abs=1e-10)
        assert eg.is_passive(w)
    area_p = eg.area(eg.convex_hull(eg.build_ensemble(wp)))
    area_m = eg.area(eg.convex_hull(eg.build_ensemble(wm)))
    wmin = eg.qutrit_state_from_macro(h012, 0.65, 0.99, branch="min")
    expected = wp if area_p <= area_m else wm
    assert np.allclose(wmin.probs, expected.probs, atol=1e-12)
    wnear = eg.qutrit_state_from_macro(h012, 0.65, 0.99, branch="near", near=wm.probs)
    assert np.allclose(wnear.probs, wm.probs, atol=1e-12)


def test_inversion_infeasible(h012):
    with pytest.raises(InfeasibleRegionError):
        eg.qutrit_state_from_macro(h012, 0.65, 1.08)  # above the curve
    with pytest.raises(InfeasibleRegionError):
        eg.qutrit_state_from_macro(h012, 0.65, 0.2)  # below the passive region
    with pytest.raises(InfeasibleRegionError):
        eg.qutrit_state_from_macro(h012, 1.7, 0.5)  # energy beyond the mean


def test_athermality_reference(h012, reference_qutrit):
    e, s = eg.macro_point(reference_qutrit)
    res = eg.geometric_athermality(h012, e, s)
    assert res.method == "exact_qutrit"
    assert not res.is_upper_bound
    assert res.value == pytest.approx(0.75204, abs=1e-5)
    assert max(res.constraint_residual) < 1e-8
    assert eg.is_passive(res.witness)
    ens = eg.build_ensemble(res.witness)
    assert res.value == eg.area(eg.convex_hull(ens))


def test_athermality_zero_on_curve(h012):
    for beta in (0.3, 1.1, 2.5):
        g = eg.gibbs_state(h012, beta)
        e, s = eg.macro_point(g)
        assert eg.geometric_athermality(h012, e, s).value <= 1e-8


def test_athermality_multistart_agrees_with_exact(h012):
    rng = np.random.default_rng(61)
    for _ in range(3):
        state = random_passive_state(rng, h012, floor=5e-2)
        e, s = eg.macro_point(state)
        exact = eg.geometric_athermality(h012, e, s)
        multi = eg.geometric_athermality(
            h012, e, s, starts=8, force_multistart=True
        )
        assert multi.method == "multistart"
        assert multi.starts_used > 0
        assert multi.value == pytest.approx(exact.value, abs=1e-6)
        assert max(multi.constraint_residual) <= 1e-8


def test_athermality_d4_upper_bound():
    rng = np.random.default_rng(71)
    spec = random_spectrum(rng, 4)
    for _ in range(3):
        probe = random_passive_state(rng, spec, floor=1e-3)
        e, s = eg.macro_point(probe)
        probe_area = eg.area(eg.convex_hull(eg.build_ensemble(probe)))
        res = eg.geometric_athermality(
            spec, e, s, starts=6, extra_starts=[probe.probs]
        )
        assert res.is_upper_bound
        assert res.value <= probe_area + 1e-9
        assert max(res.constraint_residual) <= 1e-8
        assert eg.is_passive(res.witness)
        assert res.witness.is_full_rank


def test_passive_region_bounds(h012):
    s_min, s_max = eg.passive_region_bounds(h012, 1.0)
    assert s_max == pytest.approx(math.log(3), abs=1e-12)
    s_min0, s_max0 = eg.passive_region_bounds(h012, 0.0)
    assert s_max0 == 0.0 and s_min0 == 0.0
    rng = np.random.default_rng(81)
    for _ in range(100):
        state = random_passive_state(rng, h012, floor=1e-6)
        e, s = eg.macro_point(state)
        lo, hi = eg.passive_region_bounds(h012, e)
        assert lo - 1e-9 <= s <= hi + 1e-9


def test_passive_region_bounds_general_d():
    rng = np.random.default_rng(91)
    for d in (4, 5, 6):
        spec = random_spectrum(rng, d)
        for _ in range(40):
            state = random_passive_state(rng, spec, floor=1e-6)
            e, s = eg.macro_point(state)
            lo, hi = eg.passive_region_bounds(spec, e)
            assert lo - 1e-9 <= s <= hi + 1e-9


def test_grid_monotone_and_curve_cells(h012):
    grid = eg.athermality_grid(h012, (0.0, 1.0), (0.0, math.log(3)), 41, 41)
    vals = grid.values
    # moving toward smaller E at fixed S never raises the measure
    for i in range(1, 41):
        for j in range(41):
            a, b = vals[i - 1, j], vals[i, j]
            if np.isfinite(a) and np.isfinite(b):
                assert a <= b + 1e-8
    # moving toward larger S at fixed E never raises the measure
    for i in range(41):
        for j in range(1, 41):
            a, b = vals[i, j], vals[i, j - 1]
            if np.isfinite(a) and np.isfinite(b):
                assert a <= b + 1e-8
    # the top corner node sits exactly on the thermal curve
    assert vals[-1, -1] == 0.0
    assert np.isnan(vals[0, 0]) or vals[0, 0] >= 0.0


def test_grid_translation_invariance(h012):
    grid = eg.athermality_grid(h012, (0.2, 0.9), (0.3, 1.0), 13, 13)
    shifted_spec = eg.EnergySpectrum(h012.energies + 5.0)
    grid2 = eg.athermality_grid(shifted_spec, (5.2, 5.9), (0.3, 1.0), 13, 13)
    mask = np.isfinite(grid.values)
    assert np.array_equal(mask, np.isfinite(grid2.values))
    assert np.allclose(grid.values[mask], grid2.values[mask], atol=1e-9)


def test_grid_rescale_and_exports(h012):
    grid = eg.athermality_grid(h012, (0.0, 1.0), (0.0, math.log(3)), 9, 9, rescale=True)
    resc = grid.rescaled_values
    finite = resc[np.isfinite(resc)]
    assert np.all(finite >= 0.0) and np.all(finite < 1.0)
    csv = grid.to_csv()
    assert csv.startswith("E,S,athermality,rescaled\n")
    obj = grid.to_json_obj()
    assert len(obj["values"]) == 9 and len(obj["E_axis"]) == 9
    assert "rescaled_values" in obj
