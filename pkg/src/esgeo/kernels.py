"""Backend dispatch for the hot numeric kernels.

The canonical kernel source lives in ``_kernels_numpy`` and is plain
numpy, so it runs anywhere.  When numba is available the same functions are
compiled with ``@njit`` (single source, no duplication).  Selection:

    ESGEO_BACKEND=numba   force numba (ImportError if missing)
    ESGEO_BACKEND=numpy   force the pure-numpy path
    ESGEO_BACKEND=auto    numba when importable, numpy otherwise (default)

``numpy_impl()`` and ``numba_impl()`` expose both namespaces side by side for
the equivalence tests and the benchmark script.
"""

from __future__ import annotations

import os
import types
from types import SimpleNamespace

import numpy as np

from . import _kernels_numpy as _src

_KERNEL_NAMES = [
    # dependency order: helpers first, callers after
    "gibbs_probs",
    "log_partition",
    "gibbs_energy_entropy",
    "solve_beta_for_energy",
    "solve_beta_for_entropy",
    "totally_ordered",
    "k_ensemble_points",
    "convex_hull_indices",
    "_fiber_entropy",
    "_fiber_branch",
    "qutrit_fiber_solve",
    "newton_three_level_step",
]

_PUBLIC = [n for n in _KERNEL_NAMES if not n.startswith("_")]


def numpy_impl() -> SimpleNamespace:
    """The pure-numpy kernel namespace."""
    return SimpleNamespace(**{name: getattr(_src, name) for name in _PUBLIC})


_numba_cache: SimpleNamespace | None = None


def numba_impl() -> SimpleNamespace:
    """The numba-compiled kernel namespace (compiled lazily, once)."""
    global _numba_cache
    if _numba_cache is not None:
        return _numba_cache
    from numba import njit

    env = dict(vars(_src))
    ns = {}
    for name in _KERNEL_NAMES:
        fn = getattr(_src, name)
        clone = types.FunctionType(fn.__code__, env, name, fn.__defaults__, fn.__closure__)
        jitted = njit(cache=False)(clone)
        env[name] = jitted
        ns[name] = jitted
    _numba_cache = SimpleNamespace(**{n: ns[n] for n in _PUBLIC})
    return _numba_cache


def _select_backend() -> tuple[str, SimpleNamespace]:
    choice = os.environ.get("ESGEO_BACKEND", "auto").strip().lower()
    if choice not in ("auto", "numba", "numpy"):
        raise ValueError(f"ESGEO_BACKEND must be auto|numba|numpy, got {choice!r}")
    if choice == "numpy":
        return "numpy", numpy_impl()
    if choice == "numba":
        return "numba", numba_impl()
    try:
        return "numba", numba_impl()
    except ImportError:
        return "numpy", numpy_impl()


BACKEND, _active = _select_backend()

gibbs_probs = _active.gibbs_probs
log_partition = _active.log_partition
gibbs_energy_entropy = _active.gibbs_energy_entropy
solve_beta_for_energy = _active.solve_beta_for_energy
solve_beta_for_entropy = _active.solve_beta_for_entropy
totally_ordered = _active.totally_ordered
k_ensemble_points = _active.k_ensemble_points
convex_hull_indices = _active.convex_hull_indices
qutrit_fiber_solve = _active.qutrit_fiber_solve
newton_three_level_step = _active.newton_three_level_step


def warmup() -> None:
    """Trigger JIT compilation of every active kernel on tiny inputs."""
    eps = np.array([0.0, 1.0, 2.0])
    s = np.array([0.7, 0.7, 2.3])
    p3 = np.array([0.45, 0.45, 0.1])
    gibbs_probs(eps, 1.0)
    log_partition(eps, 1.0)
    gibbs_energy_entropy(eps, 1.0)
    solve_beta_for_energy(eps, 0.5, 350.0)
    solve_beta_for_entropy(eps, 0.69, 350.0)
    totally_ordered(eps, s, 1e-12)
    k_ensemble_points(eps, s, 2, 6)
    convex_hull_indices(eps, s, 1e-10)
    qutrit_fiber_solve(eps, 0.65, 0.9489, 350.0)
    newton_three_level_step(eps, s, p3, 0.0, 0.0)
