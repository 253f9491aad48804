"""Planar convex geometry of ensembles.

Hulls, the trapezium-rule area, colinearity and thermal-line fits, virtual
temperatures, the branch/face decomposition of hull boundaries, virtual
qutrit selection, and the differential of the area under three-level
population variations.

Vertex labeling convention: counterclockwise in standard axes, starting at
the leftmost-lowest vertex (lower boundary left-to-right, then upper boundary
right-to-left).  With this labeling the trapezium sum
``area = 1/2 sum_k s_k (e_{k-1} - e_{k+1})`` is non-negative without absolute
values, and the determinant of a three-level matrix ordered the same way is
twice the (positive) triangle area.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .ensemble import EsEnsemble, EsPoint, build_ensemble, _colinear_nonnegative_slope
from .spectra import TOL_EPS, TOL_ORDER, DiagonalState, is_passive

HULL_CROSS_TOL = 1e-10
COLINEAR_TOL = 1e-10
GIBBS_FIT_TOL = 1e-8


class CompletelyPassiveError(ValueError):
    """Raised when an operation needs a state off the thermal line."""


@dataclass(frozen=True)
class ConvexRegion:
    """Convex hull vertices, counterclockwise from the leftmost-lowest."""

    eps: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        for name in ("eps", "s"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.eps.shape != self.s.shape or self.eps.size < 1:
            raise ValueError("vertex arrays must be non-empty and congruent")

    @property
    def n(self) -> int:
        return int(self.eps.size)

    @property
    def vertices(self) -> tuple[EsPoint, ...]:
        return tuple(EsPoint(float(e), float(t)) for e, t in zip(self.eps, self.s))

    @property
    def diameter(self) -> float:
        de = float(self.eps.max() - self.eps.min())
        ds = float(self.s.max() - self.s.min())
        return math.hypot(de, ds)


@dataclass(frozen=True)
class GibbsParams:
    """Inverse temperature and log partition function of a thermal line."""

    beta: float
    log_partition: float

    def __post_init__(self):
        if self.beta < 0.0:
            raise ValueError("beta must be non-negative")


@dataclass(frozen=True)
class LineFit:
    """Total-least-squares line through an ensemble, with classification.

    ``kind`` is one of ``gibbs`` (colinear, slope >= 0), ``inverted``
    (colinear, slope < 0), ``vertical`` (single energy), or ``scattered``.
    """

    kind: str
    slope: float
    intercept: float
    residual: float


@dataclass(frozen=True)
class FacePoint:
    """Non-vertex ensemble point on a hull edge, v = q*v_k + (1-q)*v_{k+1}."""

    point_index: int
    q: float


@dataclass(frozen=True)
class BranchDecomposition:
    """Hull vertices split by the componentwise chain condition.

    ``upper`` holds the hull positions k with v_{k-1} <= v_k <= v_{k+1}
    (componentwise, cyclic) plus the two extremal vertices, ``lower`` the
    rest.  ``face_points`` maps the edge index k (edge v_k -> v_{k+1}) to the
    non-vertex ensemble points sitting on it.
    """

    region: ConvexRegion
    vertex_point_index: np.ndarray
    upper: tuple[int, ...]
    lower: tuple[int, ...]
    face_points: dict[int, tuple[FacePoint, ...]] = field(default_factory=dict)


def _hull_vertex_indices(ensemble: EsEnsemble) -> np.ndarray:
    """Indices into the ensemble's distinct points, hull order (ccw)."""
    return kernels.convex_hull_indices(ensemble.eps, ensemble.s, HULL_CROSS_TOL)


def convex_hull(ensemble: EsEnsemble) -> ConvexRegion:
    """Hull of the distinct points; colinear boundary points are not vertices.

    Degenerate inputs give regions with one or two vertices and zero area.
    """
    idx = _hull_vertex_indices(ensemble)
    return ConvexRegion(ensemble.eps[idx], ensemble.s[idx])


def area(region: ConvexRegion) -> float:
    """Trapezium-rule area over the cyclic vertex list.

    Cross-checked against the absolute shoelace value; with the package's
    vertex labeling the two agree to rounding and the trapezium sum is
    non-negative.
    """
    n = region.n
    if n <= 2:
        return 0.0
    e = region.eps
    s = region.s
    trap_terms = [s[k] * (e[(k - 1) % n] - e[(k + 1) % n]) for k in range(n)]
    trap = 0.5 * math.fsum(trap_terms)
    shoe_terms = [e[k] * s[(k + 1) % n] - e[(k + 1) % n] * s[k] for k in range(n)]
    shoe = 0.5 * abs(math.fsum(shoe_terms))
    if abs(trap - shoe) > 1e-9 * max(1.0, shoe):
        raise ArithmeticError(
            f"trapezium/shoelace disagreement: {trap} vs {shoe}"
        )
    return trap


def is_colinear(region: ConvexRegion, tol: float = COLINEAR_TOL) -> bool:
    """All vertices within ``tol * max(1, diameter)`` of one straight line."""
    if region.n <= 2:
        return True
    e = region.eps
    s = region.s
    i0 = int(np.lexsort((s, e))[0])
    i1 = int(np.lexsort((s, e))[-1])
    dx, dy = e[i1] - e[i0], s[i1] - s[i0]
    norm = math.hypot(dx, dy)
    if norm == 0.0:
        return True
    dev = np.abs((e - e[i0]) * dy - (s - s[i0]) * dx) / norm
    return bool(dev.max() <= tol * max(1.0, region.diameter))


def fit_line(ensemble: EsEnsemble, tol: float = GIBBS_FIT_TOL) -> LineFit:
    """Classify the distinct points against a total-least-squares line."""
    e = ensemble.eps
    s = ensemble.s
    if e.size == 1:
        return LineFit("gibbs", 0.0, float(s[0]), 0.0)
    xm, ym = float(e.mean()), float(s.mean())
    dx, dy = e - xm, s - ym
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    sxy = float(np.dot(dx, dy))
    # eigen-decomposition of the 2x2 scatter matrix
    tr = sxx + syy
    det = sxx * syy - sxy * sxy
    disc = math.sqrt(max(tr * tr / 4.0 - det, 0.0))
    lam_max = tr / 2.0 + disc
    lam_min = tr / 2.0 - disc
    n = e.size
    residual = math.sqrt(max(lam_min, 0.0) / n)
    diam = max(ensemble.diameter, 1e-300)
    if residual > tol * diam:
        return LineFit("scattered", math.nan, math.nan, residual)
    # principal direction: pick the better-conditioned eigenvector form
    v1 = (lam_max - syy, sxy)
    v2 = (sxy, lam_max - sxx)
    vx, vy = max((v1, v2), key=lambda v: math.hypot(*v))
    if math.hypot(vx, vy) == 0.0:
        vx, vy = 1.0, 0.0
    if abs(vx) <= 1e-15 * math.hypot(vx, vy):
        return LineFit("vertical", math.inf, math.nan, residual)
    slope = vy / vx
    intercept = ym - slope * xm
    kind = "gibbs" if slope >= -1e-12 else "inverted"
    return LineFit(kind, slope, intercept, residual)


def gibbs_fit(ensemble: EsEnsemble, tol: float = GIBBS_FIT_TOL) -> GibbsParams | None:
    """Thermal parameters if the points are colinear with slope >= 0.

    The slope of the line s = beta*e + log Z is the inverse temperature and
    its intercept the log partition function.  Population-inverted lines
    (negative slope) and scattered ensembles return None; ``fit_line`` keeps
    the distinction available.
    """
    fit = fit_line(ensemble, tol)
    if fit.kind != "gibbs":
        return None
    return GibbsParams(max(fit.slope, 0.0), fit.intercept)


def virtual_temperatures(ensemble: EsEnsemble, tol_eps: float = TOL_EPS) -> dict[tuple[int, int], float]:
    """Pairwise slopes (s_j - s_i)/(e_j - e_i) over distinct points.

    Keys are 0-based point indices (i, j) with i < j in the sorted order;
    pairs with equal energies are omitted (no temperature is defined there).
    """
    out: dict[tuple[int, int], float] = {}
    e = ensemble.eps
    s = ensemble.s
    for i in range(e.size):
        for j in range(i + 1, e.size):
            de = e[j] - e[i]
            if abs(de) > tol_eps:
                out[(i, j)] = float((s[j] - s[i]) / de)
    return out


def is_completely_passive(
    state: DiagonalState,
    tol: float = COLINEAR_TOL,
    tol_order: float = TOL_ORDER,
) -> bool:
    """Whether every number of copies of the state stays passive.

    True exactly for thermal states: passive, ensemble colinear with
    non-negative slope, and equal populations inside any degenerate energy
    block.  A fully degenerate spectrum (a single block) is exempt from the
    block-equality requirement: with one energy level every state is trivially
    passive for any number of copies.

    Classification tolerates populations below the usual full-rank floor
    (cold thermal tails are tiny but legitimate); exact zeros still raise,
    since their ensemble point escapes to infinity.
    """
    if not is_passive(state, tol_order=tol_order):
        return False
    blocks = state.spectrum.degenerate_blocks()
    if len(blocks) > 1:
        for lo, hi in blocks:
            if hi - lo > 1:
                block = state.probs[lo:hi]
                if float(block.max() - block.min()) > tol_order:
                    return False
    ensemble = build_ensemble(state, p_floor=5e-324)
    return _colinear_nonnegative_slope(ensemble, tol)


def contains_points(
    region: ConvexRegion, eps: np.ndarray, s: np.ndarray, tol: float = 1e-9
) -> np.ndarray:
    """Boolean mask of query points inside (or within ``tol`` of) the region."""
    eps = np.asarray(eps, dtype=np.float64)
    s = np.asarray(s, dtype=np.float64)
    scale = max(1.0, region.diameter)
    if region.n == 1:
        return (np.abs(eps - region.eps[0]) <= tol * scale) & (
            np.abs(s - region.s[0]) <= tol * scale
        )
    inside = np.ones(eps.shape, dtype=bool)
    n = region.n
    for k in range(n if n > 2 else 1):
        ax, ay = region.eps[k], region.s[k]
        bx, by = region.eps[(k + 1) % n], region.s[(k + 1) % n]
        cross = (bx - ax) * (s - ay) - (by - ay) * (eps - ax)
        inside &= cross >= -tol * scale * scale
        if n == 2:
            inside &= cross <= tol * scale * scale
            t = ((eps - ax) * (bx - ax) + (s - ay) * (by - ay)) / (
                (bx - ax) ** 2 + (by - ay) ** 2
            )
            inside &= (t >= -tol) & (t <= 1.0 + tol)
    return inside


def branch_decomposition(ensemble: EsEnsemble) -> BranchDecomposition:
    """Split hull vertices into the chain branch and the rest; attach face points.

    A non-extremal vertex belongs to the upper branch when its cyclic
    neighbours straddle it in the componentwise order
    (v_{k-1} <= v_k <= v_{k+1}); the extremal (least and greatest) vertices
    are always assigned to the upper branch.  Ensemble points that sit
    strictly inside a hull edge are recorded as face points of that edge with
    their barycentric coordinate q (v = q*v_k + (1-q)*v_{k+1}).
    """
    idx = _hull_vertex_indices(ensemble)
    region = ConvexRegion(ensemble.eps[idx], ensemble.s[idx])
    n = region.n
    lex = np.lexsort((region.s, region.eps))
    extremes = {int(lex[0]), int(lex[-1])}
    upper: list[int] = []
    lower: list[int] = []
    for k in range(n):
        if k in extremes or n <= 2:
            upper.append(k)
            continue
        pe, ps = region.eps[(k - 1) % n], region.s[(k - 1) % n]
        ce, cs = region.eps[k], region.s[k]
        ne, ns_ = region.eps[(k + 1) % n], region.s[(k + 1) % n]
        if pe <= ce <= ne and ps <= cs <= ns_:
            upper.append(k)
        else:
            lower.append(k)
    face_points: dict[int, list[FacePoint]] = {}
    vertex_set = set(int(i) for i in idx)
    scale = max(1.0, region.diameter)
    if n >= 2:
        n_edges = n if n > 2 else 1
        for j in range(ensemble.size):
            if j in vertex_set:
                continue
            px, py = ensemble.eps[j], ensemble.s[j]
            for k in range(n_edges):
                ax, ay = region.eps[k], region.s[k]
                bx, by = region.eps[(k + 1) % n], region.s[(k + 1) % n]
                cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax)
                if abs(cross) > HULL_CROSS_TOL * scale:
                    continue
                L2 = (bx - ax) ** 2 + (by - ay) ** 2
                t = ((px - ax) * (bx - ax) + (py - ay) * (by - ay)) / L2
                if 0.0 < t < 1.0:
                    face_points.setdefault(k, []).append(FacePoint(j, float(1.0 - t)))
                    break
    return BranchDecomposition(
        region,
        idx,
        tuple(upper),
        tuple(lower),
        {k: tuple(v) for k, v in face_points.items()},
    )


def branch_to_json_obj(decomp: BranchDecomposition) -> dict:
    return {
        "vertices": [
            {"epsilon": float(e), "s": float(t)}
            for e, t in zip(decomp.region.eps, decomp.region.s)
        ],
        "upper": list(decomp.upper),
        "lower": list(decomp.lower),
        "face_points": {
            str(k): [
                {"point_index": fp.point_index, "q": fp.q} for fp in fps
            ]
            for k, fps in decomp.face_points.items()
        },
    }


def _triangle_cross(e, s, a, b, c) -> float:
    return (e[b] - e[a]) * (s[c] - s[a]) - (s[b] - s[a]) * (e[c] - e[a])


def _constraint_ok(
    levels: tuple[int, int, int],
    eps: np.ndarray,
    s: np.ndarray,
    pos_of: dict[int, int],
    hull_delta: np.ndarray,
    scale: float,
) -> bool:
    """Sign conditions that make the area differential monotone.

    For a triple sorted by energy (a, b, c) the required sign of the hull
    neighbour gap e_{k+1} - e_{k-1} at each member is +1 at the middle and -1
    at the ends when the middle point lies below the chord, and the reverse
    when it lies above; members that are not hull vertices contribute nothing
    to the differential and are unconstrained.
    """
    a, b, c = levels
    cross = _triangle_cross(eps, s, a, b, c)
    if abs(cross) <= COLINEAR_TOL * scale:
        return False
    below = cross > 0.0
    req = {a: -1.0, b: 1.0, c: -1.0} if below else {a: 1.0, b: -1.0, c: 1.0}
    for lvl in levels:
        if lvl in pos_of:
            if req[lvl] * hull_delta[pos_of[lvl]] < 0.0:
                return False
    return True


def select_virtual_qutrit(state: DiagonalState) -> tuple[int, int, int]:
    """Three level indices whose populations can steer (energy, entropy).

    The returned triple is non-colinear in the (epsilon, s) plane and
    satisfies the neighbour-gap sign conditions that make the induced area
    change monotone under any admissible direction.  Selection walks the
    branch structure of the hull (chain vertices with the right gap signs
    first, extremes and off-hull points as fallbacks); vertices carrying face
    points are replaced by their nearest face point, which removes them from
    the differential without changing the steering.

    Requires a passive, not completely passive state with a non-degenerate
    spectrum.
    """
    if state.spectrum.is_degenerate:
        raise ValueError("virtual qutrit selection needs a non-degenerate spectrum")
    if not is_passive(state):
        raise ValueError("state must be passive")
    if is_completely_passive(state):
        raise CompletelyPassiveError("thermal states admit no virtual qutrit")
    ensemble = build_ensemble(state)
    eps, s = ensemble.eps, ensemble.s
    d = eps.size
    decomp = branch_decomposition(ensemble)
    region = decomp.region
    n = region.n
    idx = decomp.vertex_point_index
    pos_of = {int(idx[k]): k for k in range(n)}
    hull_delta = np.array(
        [region.eps[(k + 1) % n] - region.eps[(k - 1) % n] for k in range(n)]
    )
    scale = max(1.0, ensemble.diameter) ** 2

    lex = np.lexsort((region.s, region.eps))
    x_left = int(idx[int(lex[0])])
    x_right = int(idx[int(lex[-1])])
    chain = sorted(
        (int(idx[k]) for k in range(n) if hull_delta[k] > 0 and k not in (int(lex[0]), int(lex[-1]))),
    )
    anti = sorted(
        (int(idx[k]) for k in range(n) if hull_delta[k] < 0 and k not in (int(lex[0]), int(lex[-1]))),
    )

    def finish(levels):
        return _substitute_face_points(levels, ensemble, decomp)

    candidates: list[tuple[int, int, int]] = []
    if not chain:
        # single lower edge: bridge the extremes over each off-chain vertex
        for b in anti:
            candidates.append(tuple(sorted((x_left, b, x_right))))
    elif not anti:
        # single upper edge: extremes plus each chain vertex
        for b in chain:
            candidates.append(tuple(sorted((x_left, b, x_right))))
    else:
        for b in chain:
            left_anti = [a for a in anti if eps[a] < eps[b]]
            right_anti = [c for c in anti if eps[c] > eps[b]]
            lefts = ([max(left_anti)] if left_anti else []) + [x_left]
            rights = ([min(right_anti)] if right_anti else []) + [x_right]
            for a in lefts:
                for c in rights:
                    candidates.append((a, b, c))
        for b in anti:
            candidates.append(tuple(sorted((x_left, b, x_right))))
    for cand in candidates:
        if _constraint_ok(cand, eps, s, pos_of, hull_delta, scale):
            return finish(cand)
    # exhaustive fallback over every energy-sorted triple
    for b in range(d):
        for a in range(b):
            for c in range(b + 1, d):
                cand = (a, b, c)
                if _constraint_ok(cand, eps, s, pos_of, hull_delta, scale):
                    return finish(cand)
    raise RuntimeError("no admissible virtual qutrit found")


def _substitute_face_points(
    levels: tuple[int, int, int], ensemble: EsEnsemble, decomp: BranchDecomposition
) -> tuple[int, int, int]:
    """Swap members that are face-pointed vertices for their nearest face point."""
    idx = decomp.vertex_point_index
    pos_of = {int(idx[k]): k for k in range(decomp.region.n)}
    eps, s = ensemble.eps, ensemble.s
    n = decomp.region.n
    out = list(levels)
    for slot, lvl in enumerate(levels):
        k = pos_of.get(lvl)
        if k is None:
            continue
        attached = []
        for edge in (k, (k - 1) % n):
            for fp in decomp.face_points.get(edge, ()):
                attached.append(fp.point_index)
        if not attached:
            continue
        dists = [
            math.hypot(eps[j] - eps[lvl], s[j] - s[lvl]) for j in attached
        ]
        repl = attached[int(np.argmin(dists))]
        trial = list(out)
        trial[slot] = repl
        if len(set(trial)) == 3:
            a, b, c = sorted(trial)
            if abs(_triangle_cross(eps, s, a, b, c)) > COLINEAR_TOL:
                out = trial
    return tuple(sorted(out))


def qutrit_area_differential(
    state: DiagonalState,
    qutrit_indices: tuple[int, int, int],
    dE: float,
    dS: float,
) -> float:
    """Area change induced by moving (energy, entropy) by (dE, dS).

    Inverts the three-level matrix with rows (epsilon, s, 1) to get the
    population changes realizing (dE, dS, 0), then sums the per-vertex area
    sensitivities (half the hull-neighbour energy gap over the population)
    for the members that are hull vertices.
    """
    ensemble = build_ensemble(state)
    eps, s = ensemble.eps, ensemble.s
    level_eps = state.spectrum.energies
    level_s = -np.log(state.probs)
    i1, i2, i3 = qutrit_indices
    e3 = np.array([level_eps[i1], level_eps[i2], level_eps[i3]])
    s3 = np.array([level_s[i1], level_s[i2], level_s[i3]])
    p3 = np.array([state.probs[i1], state.probs[i2], state.probs[i3]])
    det = (
        e3[0] * (s3[1] - s3[2]) - e3[1] * (s3[0] - s3[2]) + e3[2] * (s3[0] - s3[1])
    )
    scale = max(1.0, ensemble.diameter) ** 2
    if abs(det) <= COLINEAR_TOL * scale:
        raise ValueError("qutrit members are colinear; the steering matrix is singular")
    dp = kernels.newton_three_level_step(e3, s3, p3, dE, dS)
    decomp = branch_decomposition(ensemble)
    idx = decomp.vertex_point_index
    n = decomp.region.n
    pos_of_point = {int(idx[k]): k for k in range(n)}
    total = 0.0
    for member, dpi in zip((i1, i2, i3), dp):
        # locate the member's distinct point
        j = int(np.argmin(np.abs(eps - level_eps[member]) + np.abs(s - level_s[member])))
        k = pos_of_point.get(j)
        if k is None:
            continue  # face or interior point: no vertex sensitivity
        delta = decomp.region.eps[(k + 1) % n] - decomp.region.eps[(k - 1) % n]
        total += 0.5 * (delta / state.probs[member]) * dpi
    return float(total)
