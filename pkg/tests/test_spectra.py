import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import esgeo as eg
from conftest import random_passive_state, random_spectrum, random_state


def test_spectrum_validation():
    with pytest.raises(ValueError):
        eg.EnergySpectrum([2.0, 1.0])
    with pytest.raises(ValueError):
        eg.EnergySpectrum([])
    with pytest.raises(ValueError):
        eg.EnergySpectrum([0.0, np.inf])
    assert eg.EnergySpectrum([0.0, 0.0, 1.0]).is_degenerate
    assert not eg.EnergySpectrum([0.0, 1.0]).is_degenerate


def test_degenerate_blocks():
    spec = eg.EnergySpectrum([0.0, 0.0, 1.0, 2.0, 2.0, 2.0])
    assert spec.degenerate_blocks() == [(0, 2), (2, 3), (3, 6)]


def test_state_validation(h012):
    with pytest.raises(ValueError):
        eg.DiagonalState(h012, [0.5, 0.5])
    with pytest.raises(ValueError):
        eg.DiagonalState(h012, [0.5, 0.4, 0.2])
    with pytest.raises(ValueError):
        eg.DiagonalState(h012, [0.6, 0.5, -0.1])
    # exact zeros are allowed at construction; full-rank is checked later
    st0 = eg.DiagonalState(h012, [0.5, 0.5, 0.0])
    assert not st0.is_full_rank


def test_is_passive_examples():
    h123 = eg.EnergySpectrum([1.0, 2.0, 3.0])
    assert not eg.is_passive(eg.DiagonalState(h123, [0.25, 0.25, 0.5]))
    assert eg.is_passive(eg.DiagonalState(h123, [0.5, 0.25, 0.25]))


def test_is_passive_degenerate_blocks():
    h = eg.EnergySpectrum([0.0, 0.0, 1.0])
    # any ordering inside the block is fine as long as the block dominates
    assert eg.is_passive(eg.DiagonalState(h, [0.3, 0.5, 0.2]))
    assert eg.is_passive(eg.DiagonalState(h, [0.5, 0.3, 0.2]))
    # a block member below a higher level's population is not passive: the
    # in-block swap that pushes the small weight up in energy lowers E
    assert not eg.is_passive(eg.DiagonalState(h, [0.2, 0.5, 0.3]))
    assert not eg.is_passive(eg.DiagonalState(h, [0.5, 0.2, 0.3]))


def test_passify_examples():
    h123 = eg.EnergySpectrum([1.0, 2.0, 3.0])
    out, perm = eg.passify(eg.DiagonalState(h123, [0.25, 0.25, 0.5]))
    assert np.allclose(out.probs, [0.5, 0.25, 0.25])
    out2, perm2 = eg.passify(out)
    assert np.array_equal(perm2, np.arange(3))
    h = eg.EnergySpectrum([0.0, 1.0, 2.0])
    out3, _ = eg.passify(eg.DiagonalState(h, [0.1, 0.45, 0.45]))
    assert np.allclose(out3.probs, np.sort([0.1, 0.45, 0.45])[::-1])


@settings(max_examples=80, deadline=None)
@given(st.lists(st.floats(1e-6, 1.0), min_size=2, max_size=7))
def test_passify_idempotent_and_passive(weights):
    p = np.array(weights)
    p = p / p.sum()
    spec = eg.EnergySpectrum(np.linspace(0.0, 2.0, p.size))
    state = eg.DiagonalState(spec, p)
    passified, perm = eg.passify(state)
    assert eg.is_passive(passified)
    again, perm2 = eg.passify(passified)
    assert np.array_equal(again.probs, passified.probs)
    assert np.array_equal(perm2, np.arange(p.size))
    # energy never increases, entropy exactly preserved
    assert eg.average_energy(passified) <= eg.average_energy(state) + 1e-15
    assert eg.von_neumann_entropy(passified) == pytest.approx(
        eg.von_neumann_entropy(state), abs=1e-13
    )


def test_energy_entropy_examples(h012):
    h123 = eg.EnergySpectrum([1.0, 2.0, 3.0])
    state = eg.DiagonalState(h123, [0.25, 0.25, 0.5])
    assert eg.average_energy(state) == pytest.approx(2.25, abs=1e-15)
    uniform = eg.DiagonalState(h012, np.full(3, 1 / 3))
    assert eg.von_neumann_entropy(uniform) == pytest.approx(np.log(3), abs=1e-14)
    reg = eg.full_rank_regularize(eg.DiagonalState(h012, [0.5, 0.5, 0.0]), 1e-4)
    e, s = eg.macro_point(reg)
    assert e == pytest.approx(0.5, abs=1e-3)
    assert s == pytest.approx(np.log(2), abs=1e-3)


def test_macro_point_bounds():
    rng = np.random.default_rng(11)
    for _ in range(200):
        d = int(rng.integers(1, 8))
        spec = random_spectrum(rng, d)
        state = random_state(rng, spec)
        e, s = eg.macro_point(state)
        assert spec.energies[0] - 1e-12 <= e <= spec.energies[-1] + 1e-12
        assert -1e-12 <= s <= np.log(d) + 1e-12


def test_ergotropy_worked_example():
    h123 = eg.EnergySpectrum([1.0, 2.0, 3.0])
    state = eg.DiagonalState(h123, [0.25, 0.25, 0.5])
    assert eg.single_shot_ergotropy(state) == pytest.approx(0.5, abs=1e-15)


def test_ergotropy_zero_iff_passive():
    rng = np.random.default_rng(5)
    for _ in range(100):
        spec = random_spectrum(rng, int(rng.integers(2, 6)))
        state = random_state(rng, spec)
        w = eg.single_shot_ergotropy(state)
        assert w >= 0.0
        if eg.is_passive(state):
            assert w == 0.0
        else:
            assert w > 0.0
    passive = random_passive_state(rng, random_spectrum(rng, 5))
    assert eg.single_shot_ergotropy(passive) == 0.0


def test_ergotropy_matches_permutation_minimum():
    rng = np.random.default_rng(17)
    for _ in range(100):
        d = int(rng.integers(2, 6))
        spec = random_spectrum(rng, d)
        state = random_state(rng, spec)
        e0 = eg.average_energy(state)
        brute = min(
            float(np.dot(spec.energies, state.probs[list(perm)]))
            for perm in itertools.permutations(range(d))
        )
        assert eg.single_shot_ergotropy(state) == pytest.approx(e0 - brute, abs=1e-14)


def test_full_rank_regularize(h012):
    state = eg.DiagonalState(h012, [0.5, 0.5, 0.0])
    reg = eg.full_rank_regularize(state, 1e-4)
    assert np.allclose(reg.probs[:2], 0.5 * (1 - 1e-4) + 1e-4 / 3)
    assert reg.probs[2] == pytest.approx(1e-4 / 3, rel=1e-12)
    assert reg.probs.min() >= 1e-4 / 3 - 1e-18
    tiny = eg.full_rank_regularize(eg.DiagonalState(h012, [0.2, 0.3, 0.5]), 1e-14)
    assert np.allclose(tiny.probs, [0.2, 0.3, 0.5], atol=1e-13)
    with pytest.raises(ValueError):
        eg.full_rank_regularize(state, 0.0)
    with pytest.raises(ValueError):
        eg.full_rank_regularize(state, 1.0)


def test_regularize_commutes_with_passify():
    rng = np.random.default_rng(23)
    for _ in range(50):
        spec = random_spectrum(rng, 5)
        state = random_state(rng, spec)
        a = eg.full_rank_regularize(eg.passify(state)[0], 1e-3)
        b = eg.passify(eg.full_rank_regularize(state, 1e-3))[0]
        assert np.allclose(a.probs, b.probs, atol=1e-15)


def test_load_state_file(tmp_path):
    path = tmp_path / "state.json"
    path.write_text('{"energies": [0, 1, 2], "probs": [2, 2, 1]}')
    with pytest.warns(UserWarning, match="normalizing"):
        state = eg.load_state_file(str(path))
    assert np.allclose(state.probs, [0.4, 0.4, 0.2])
    path2 = tmp_path / "spec.json"
    path2.write_text('{"energies": [0, 0.5, 1.5]}')
    spec = eg.load_state_file(str(path2))
    assert isinstance(spec, eg.EnergySpectrum)
    path3 = tmp_path / "bad.json"
    path3.write_text('{"probs": [1.0]}')
    with pytest.raises(ValueError):
        eg.load_state_file(str(path3))
