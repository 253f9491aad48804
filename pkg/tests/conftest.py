import numpy as np
import pytest

import esgeo as eg
from esgeo import kernels


@pytest.fixture(scope="session", autouse=True)
def _warm_kernels():
    # JIT compile once so timed tests measure algorithms, not compilation
    kernels.warmup()


@pytest.fixture
def h012():
    return eg.EnergySpectrum([0.0, 1.0, 2.0])


@pytest.fixture
def reference_qutrit(h012):
    """Passive qutrit with populations (0.45, 0.45, 0.1): the standard worked case."""
    return eg.DiagonalState(h012, [0.45, 0.45, 0.1])


@pytest.fixture
def top_passive_state(h012):
    """Maximally energetic passive qutrit, regularized to full rank."""
    return eg.full_rank_regularize(eg.DiagonalState(h012, [0.5, 0.5, 0.0]), 1e-4)


def random_spectrum(rng, d, lo=0.0, hi=3.0, min_gap=0.05):
    while True:
        e = np.sort(rng.uniform(lo, hi, d))
        if d == 1 or np.min(np.diff(e)) >= min_gap:
            return eg.EnergySpectrum(e)


def random_probs(rng, d, floor=1e-8):
    p = rng.dirichlet(np.ones(d))
    p = np.maximum(p, floor)
    return p / p.sum()


def random_passive_state(rng, spectrum, floor=1e-8):
    p = np.sort(random_probs(rng, spectrum.dim, floor))[::-1]
    return eg.DiagonalState(spectrum, p)


def random_state(rng, spectrum, floor=1e-8):
    return eg.DiagonalState(spectrum, random_probs(rng, spectrum.dim, floor))


def pairwise_totally_ordered(eps, s, tol=1e-12):
    """Quadratic oracle for the total-order test."""
    n = len(eps)
    for a in range(n):
        for b in range(n):
            if eps[a] < eps[b] - tol and s[a] > s[b] + tol:
                return False
    return True


def shoelace_area(eps, s):
    """Absolute shoelace value over a cyclic vertex list."""
    import math

    n = len(eps)
    terms = [eps[k] * s[(k + 1) % n] - eps[(k + 1) % n] * s[k] for k in range(n)]
    return 0.5 * abs(math.fsum(terms))
