import math

import numpy as np
import pytest

import esgeo as eg
from conftest import random_spectrum, random_state

# -- independent scalar oracles (own softmax, own searches) -----------------


def oracle_gibbs(eps, beta):
    w = np.exp(-beta * (eps - eps.min()))
    return w / w.sum()


def oracle_energy(eps, beta):
    return float(np.dot(oracle_gibbs(eps, beta), eps))


def oracle_entropy(eps, beta):
    p = oracle_gibbs(eps, beta)
    p = p[p > 0]
    return float(-np.dot(p, np.log(p)))


def golden_min(fun, lo, hi, iters=200):
    phi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - phi * (b - a), a + phi * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - phi * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + phi * (b - a)
            fd = fun(d)
        if b - a < 1e-12 * (1.0 + abs(b)):
            break
    return (a + b) / 2.0


def test_gibbs_state_basics(h012):
    assert np.allclose(eg.gibbs_state(h012, 0.0).probs, 1 / 3)
    g = eg.gibbs_state(h012, 0.83)
    assert eg.average_energy(g) == pytest.approx(0.502, abs=1e-3)
    with pytest.raises(ValueError):
        eg.gibbs_state(h012, -1.0)
    # beyond the underflow cap the state saturates but stays positive
    frozen = eg.gibbs_state(h012, 1e6)
    assert frozen.probs.min() > 0.0
    assert eg.average_energy(frozen) < 1e-100


def test_solver_reference_temperatures(h012, top_passive_state):
    e0, s0 = eg.macro_point(top_passive_state)
    beta_min = eg.solve_beta_for_energy(h012, e0)
    beta_max = eg.solve_beta_for_entropy(h012, s0)
    assert beta_min == pytest.approx(0.83, abs=0.01)
    assert beta_max == pytest.approx(1.32, abs=0.01)


def test_solver_roundtrips():
    rng = np.random.default_rng(14)
    for _ in range(50):
        spec = random_spectrum(rng, int(rng.integers(2, 8)))
        beta = rng.uniform(0.0, 10.0)
        e_t = oracle_energy(spec.energies, beta)
        s_t = oracle_entropy(spec.energies, beta)
        if e_t <= spec.energies[0] + 1e-12 or s_t <= 1e-12:
            continue
        b1 = eg.solve_beta_for_energy(spec, e_t)
        b2 = eg.solve_beta_for_entropy(spec, s_t)
        assert oracle_energy(spec.energies, b1) == pytest.approx(
            e_t, abs=1e-10 * spec.span
        )
        assert oracle_entropy(spec.energies, b2) == pytest.approx(e_t * 0 + s_t, abs=1e-10)


def test_solver_edges(h012):
    assert eg.solve_beta_for_energy(h012, h012.mean_energy) == 0.0
    assert eg.solve_beta_for_entropy(h012, math.log(3)) == 0.0
    with pytest.raises(ValueError):
        eg.solve_beta_for_energy(h012, 1.5)
    with pytest.raises(ValueError):
        eg.solve_beta_for_energy(h012, 0.0)
    with pytest.raises(ValueError):
        eg.solve_beta_for_entropy(h012, 1.2)
    with pytest.raises(ValueError):
        eg.solve_beta_for_entropy(h012, 0.0)


def test_work_and_entropy_gaps(h012, top_passive_state):
    e0, s0 = eg.macro_point(top_passive_state)
    # independent bisection oracle for the two gap measures
    eps = h012.energies
    bmax = golden_min(lambda b: abs(oracle_entropy(eps, b) - s0), 0.0, 50.0)
    bmin = golden_min(lambda b: abs(oracle_energy(eps, b) - e0), 0.0, 50.0)
    w = eg.max_extractable_work(top_passive_state)
    ds = eg.max_entropic_gain(top_passive_state)
    assert w == pytest.approx(e0 - oracle_energy(eps, bmax), abs=1e-8)
    assert ds == pytest.approx(oracle_entropy(eps, bmin) - s0, abs=1e-8)
    # coarse published targets for this configuration
    assert w == pytest.approx(0.194, abs=3e-3)
    assert ds == pytest.approx(0.210, abs=3e-3)


def test_gaps_vanish_on_thermal_states(h012):
    for beta in (0.1, 1.0, 4.0):
        g = eg.gibbs_state(h012, beta)
        assert eg.max_extractable_work(g) == pytest.approx(0.0, abs=1e-9)
        assert eg.max_entropic_gain(g) == pytest.approx(0.0, abs=1e-9)


def test_gap_dominates_single_shot_ergotropy():
    # the many-copy work gap is never smaller than the one-shot permutation gap
    rng = np.random.default_rng(19)
    for _ in range(50):
        spec = random_spectrum(rng, int(rng.integers(2, 6)))
        state = random_state(rng, spec, floor=1e-6)
        passive, _ = eg.passify(state)
        w_many = eg.max_extractable_work(state)
        w_one = eg.single_shot_ergotropy(state)
        assert w_many >= w_one - 1e-9


def test_beta_athermality(h012):
    g1 = eg.gibbs_state(h012, 1.0)
    assert eg.beta_athermality(g1, 1.0) == pytest.approx(0.0, abs=1e-12)
    assert eg.beta_athermality(g1, 2.0) > 1e-3
    rng = np.random.default_rng(25)
    for _ in range(50):
        spec = random_spectrum(rng, int(rng.integers(2, 6)))
        state = random_state(rng, spec, floor=1e-9)
        beta = rng.uniform(0.0, 8.0)
        val = eg.beta_athermality(state, beta)
        # independent relative-entropy evaluation
        gamma = oracle_gibbs(spec.energies, beta)
        ref = float(np.dot(state.probs, np.log(state.probs / gamma)))
        assert val == pytest.approx(ref, abs=1e-10)
        assert val >= -1e-15


def test_min_beta_athermality(h012, top_passive_state):
    for beta in (0.3, 1.7):
        g = eg.gibbs_state(h012, beta)
        res = eg.min_beta_athermality(g)
        assert res.value == pytest.approx(0.0, abs=1e-10)
        assert res.beta == pytest.approx(beta, abs=1e-6)
    res0 = eg.min_beta_athermality(top_passive_state)
    assert res0.beta == pytest.approx(0.83, abs=0.01)
    assert res0.value == pytest.approx(0.2078, abs=1e-3)
    assert not res0.capped
    # matches a golden-section search over the whole temperature range
    rng = np.random.default_rng(33)
    for _ in range(30):
        spec = random_spectrum(rng, 3)
        state = random_state(rng, spec, floor=1e-9)
        res = eg.min_beta_athermality(state)
        cap = eg.beta_cap(spec)
        val = golden_min(lambda b: eg.beta_athermality(state, b), 0.0, min(cap, 200.0))
        assert res.value == pytest.approx(eg.beta_athermality(state, val), abs=1e-8)


def test_min_beta_athermality_matches_entropy_gain():
    rng = np.random.default_rng(41)
    for _ in range(50):
        spec = random_spectrum(rng, int(rng.integers(2, 7)))
        state = random_state(rng, spec, floor=1e-9)
        assert eg.min_beta_athermality(state).value == pytest.approx(
            eg.max_entropic_gain(state), abs=1e-10
        )


def test_min_beta_athermality_ground_cap(h012):
    p1 = 1e-153
    state = eg.DiagonalState(h012, np.array([1.0 - 2 * p1, p1, p1]))
    res = eg.min_beta_athermality(state)
    assert res.capped
    assert res.beta == eg.beta_cap(h012)


def test_equilibrium_curve(h012):
    curve = eg.equilibrium_curve(h012, 64)
    assert curve.betas[0] == 0.0
    assert curve.E[0] == pytest.approx(1.0, abs=1e-14)
    assert curve.S[0] == pytest.approx(math.log(3), abs=1e-14)
    assert curve.E[-1] == pytest.approx(0.0, abs=1e-12)
    assert curve.S[-1] == pytest.approx(0.0, abs=1e-12)
    assert np.all(np.diff(curve.E) < 0)
    assert np.all(np.diff(curve.S) < 0)
    tiny = eg.equilibrium_curve(h012, 2)
    assert tiny.betas.size == 2


def test_equilibrium_curve_slope_is_beta(h012):
    # dS/dE along the curve equals beta: central differences across samples
    curve = eg.equilibrium_curve(h012, 400)
    E, S, B = curve.E, curve.S, curve.betas
    for i in range(1, 180):
        slope = (S[i + 1] - S[i - 1]) / (E[i + 1] - E[i - 1])
        if B[i] < 1e-2:
            continue
        assert slope == pytest.approx(B[i], rel=1e-3)


def test_equilibrium_curve_csv(h012):
    text = eg.equilibrium_curve(h012, 4).to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "beta,E,S"
    assert len(lines) == 5
