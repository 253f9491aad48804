"""Planar point multisets built from diagonal states.

Each level of a full-rank state maps to the point (energy, -log prob); the
resulting multiset is the object every geometric question is asked of.
Points that coincide (degenerate levels with equal probabilities) are merged
with a multiplicity count.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .spectra import TOL_EPS, DiagonalState, MacroPoint, NotFullRankError

MERGE_TOL = 1e-10
COMPOSITION_CAP = 10_000_000
DEFAULT_K_MAX = 64


@dataclass(frozen=True)
class EsPoint:
    epsilon: float
    s: float
    multiplicity: int = 1


@dataclass(frozen=True)
class EsEnsemble:
    """Multiset of (epsilon, s) points, lexicographically sorted and merged.

    ``eps``/``s``/``mult`` describe the distinct points.  For ensembles built
    directly from a state, the per-level arrays (``source_eps``, ``source_s``,
    ``source_probs``) are retained so the ensemble doubles as a random
    variable with weights; derived ensembles (sums, k-copy regularizations)
    drop them.
    """

    eps: np.ndarray
    s: np.ndarray
    mult: np.ndarray
    source_eps: np.ndarray | None = None
    source_s: np.ndarray | None = None
    source_probs: np.ndarray | None = None

    def __post_init__(self):
        for name in ("eps", "s"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        m = np.asarray(self.mult, dtype=np.int64).copy()
        m.setflags(write=False)
        object.__setattr__(self, "mult", m)
        if not (self.eps.shape == self.s.shape == self.mult.shape):
            raise ValueError("eps, s, mult must have identical shapes")
        if self.eps.size < 1:
            raise ValueError("ensemble must contain at least one point")
        if not (np.all(np.isfinite(self.eps)) and np.all(np.isfinite(self.s))):
            raise ValueError("ensemble points must be finite")
        if np.any(self.mult < 1):
            raise ValueError("multiplicities must be >= 1")
        if self.source_probs is not None:
            sp = np.asarray(self.source_probs, dtype=np.float64).copy()
            sp.setflags(write=False)
            object.__setattr__(self, "source_probs", sp)
            for name in ("source_eps", "source_s"):
                arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
                arr.setflags(write=False)
                object.__setattr__(self, name, arr)
            if abs(float(sp.sum()) - 1.0) > 1e-12:
                raise ValueError("source_probs must sum to 1")
            if sp.size != self.source_eps.size or sp.size != self.source_s.size:
                raise ValueError("source arrays must share one length")

    @property
    def size(self) -> int:
        """Number of distinct points."""
        return int(self.eps.size)

    @property
    def total_multiplicity(self) -> int:
        return int(self.mult.sum())

    @property
    def points(self) -> tuple[EsPoint, ...]:
        return tuple(
            EsPoint(float(e), float(t), int(m))
            for e, t, m in zip(self.eps, self.s, self.mult)
        )

    @property
    def diameter(self) -> float:
        de = float(self.eps.max() - self.eps.min())
        ds = float(self.s.max() - self.s.min())
        return math.hypot(de, ds)


def _merge_points(eps: np.ndarray, s: np.ndarray, mult: np.ndarray, tol: float = MERGE_TOL):
    """Merge points equal within L-inf ``tol`` (grid quantization) and sort."""
    ke = np.round(eps / tol).astype(np.int64)
    ks = np.round(s / tol).astype(np.int64)
    keys = np.stack([ke, ks], axis=1)
    _, first, inverse = np.unique(keys, axis=0, return_index=True, return_inverse=True)
    out_mult = np.zeros(first.size, dtype=np.int64)
    np.add.at(out_mult, inverse, mult)
    out_eps = eps[first]
    out_s = s[first]
    order = np.lexsort((out_s, out_eps))
    return out_eps[order], out_s[order], out_mult[order]


def build_ensemble(state: DiagonalState, p_floor: float | None = None) -> EsEnsemble:
    """One point (e_i, -log p_i) per level; coincident points merged.

    Raises :class:`~esgeo.spectra.NotFullRankError` for states with
    probabilities below the floor (default: the package-wide full-rank
    floor).  Classification helpers may pass a smaller floor; -log p stays
    finite down to the smallest positive double.
    """
    if p_floor is None:
        state.require_full_rank()
    elif state.probs.min() < p_floor:
        raise NotFullRankError(
            f"state has a probability below {p_floor}; regularize first"
        )
    eps = state.spectrum.energies
    s = -np.log(state.probs)
    me, ms, mm = _merge_points(eps.copy(), s, np.ones(eps.size, dtype=np.int64))
    return EsEnsemble(
        me, ms, mm,
        source_eps=eps.copy(), source_s=s, source_probs=state.probs,
    )


def ensemble_from_points(points) -> EsEnsemble:
    """Build an ensemble from an iterable of (epsilon, s[, multiplicity])."""
    rows = [tuple(p) for p in points]
    eps = np.array([r[0] for r in rows], dtype=np.float64)
    s = np.array([r[1] for r in rows], dtype=np.float64)
    mult = np.array([r[2] if len(r) > 2 else 1 for r in rows], dtype=np.int64)
    return EsEnsemble(*_merge_points(eps, s, mult))


def is_totally_ordered(ensemble: EsEnsemble, tol: float = 1e-12) -> bool:
    """Every pair comparable: no point up-left of another beyond ``tol``."""
    return bool(kernels.totally_ordered(ensemble.eps, ensemble.s, tol))


def minkowski_sum(a: EsEnsemble, b: EsEnsemble) -> EsEnsemble:
    """All pairwise vector sums; multiplicities multiply and merge."""
    eps = (a.eps[:, None] + b.eps[None, :]).ravel()
    s = (a.s[:, None] + b.s[None, :]).ravel()
    mult = (a.mult[:, None] * b.mult[None, :]).ravel()
    return EsEnsemble(*_merge_points(eps, s, mult))


def composition_count(k: int, m: int) -> int:
    """Number of weak compositions of k into m parts: C(k+m-1, m-1)."""
    return math.comb(k + m - 1, m - 1)


def regularized_k_ensemble(
    ensemble: EsEnsemble, k: int, cap: int = COMPOSITION_CAP
) -> EsEnsemble:
    """Per-copy ensemble of k independent copies.

    Enumerates (1/k) sum_i c_i v_i over all non-negative integer weights
    summing to k, over the distinct base points only (never the d^k tensor
    expansion), then deduplicates.  Refuses when the composition count
    exceeds ``cap``.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if k == 1:
        return EsEnsemble(ensemble.eps.copy(), ensemble.s.copy(), ensemble.mult.copy())
    m = ensemble.size
    count = composition_count(k, m)
    if count > cap:
        raise ValueError(
            f"composition count {count} for k={k}, m={m} exceeds cap {cap}"
        )
    eps_k, s_k = kernels.k_ensemble_points(ensemble.eps, ensemble.s, k, count)
    me, ms, mm = _merge_points(eps_k, s_k, np.ones(count, dtype=np.int64))
    return EsEnsemble(me, ms, np.ones(me.size, dtype=np.int64))


def min_activation_k(
    ensemble: EsEnsemble,
    k_max: int = DEFAULT_K_MAX,
    tol: float = 1e-12,
    cap: int = COMPOSITION_CAP,
) -> int | None:
    """Smallest k <= k_max whose per-copy ensemble loses the total order.

    Returns None when the ensemble stays ordered through k_max, which means
    "k-passive up to k_max" rather than completely passive -- except when
    all points are colinear with non-negative slope, where the order can
    never break and None is certain for every k.
    """
    if k_max < 1:
        raise ValueError("k_max must be >= 1")
    if not is_totally_ordered(ensemble, tol):
        return 1
    if _colinear_nonnegative_slope(ensemble, tol):
        return None
    for k in range(2, k_max + 1):
        vk = regularized_k_ensemble(ensemble, k, cap=cap)
        if not is_totally_ordered(vk, tol):
            return k
    return None


def _colinear_nonnegative_slope(ensemble: EsEnsemble, tol: float) -> bool:
    eps, s = ensemble.eps, ensemble.s
    if eps.size <= 1:
        return True
    if eps.size == 2:
        de = eps[1] - eps[0]
        ds = s[1] - s[0]
        if abs(de) <= tol:
            return True  # single energy: vertical segment, order never breaks
        return bool(ds / de >= -tol)
    dx = eps - eps[0]
    dy = s - s[0]
    # reference direction from the extreme points dominates the spread
    cross = dx[-1] * dy - dy[-1] * dx
    scale = max(ensemble.diameter, 1.0)
    if np.any(np.abs(cross) > tol * scale * scale):
        return False
    de = eps[-1] - eps[0]
    ds = s[-1] - s[0]
    if abs(de) <= tol:
        return True
    return bool(ds / de >= -tol)


def expectation(ensemble: EsEnsemble) -> MacroPoint:
    """Weighted mean point; equals the source state's (energy, entropy)."""
    if ensemble.source_probs is None:
        raise ValueError("ensemble carries no source weights")
    p = ensemble.source_probs
    return MacroPoint(
        float(np.dot(p, ensemble.source_eps)), float(np.dot(p, ensemble.source_s))
    )


def ensemble_to_json_obj(ensemble: EsEnsemble) -> list[dict]:
    return [
        {"epsilon": float(e), "s": float(t), "multiplicity": int(m)}
        for e, t, m in zip(ensemble.eps, ensemble.s, ensemble.mult)
    ]


def ensemble_to_csv(ensemble: EsEnsemble) -> str:
    buf = io.StringIO()
    buf.write("epsilon,s,multiplicity\n")
    for e, t, m in zip(ensemble.eps, ensemble.s, ensemble.mult):
        buf.write(f"{e:.17g},{t:.17g},{m}\n")
    return buf.getvalue()
