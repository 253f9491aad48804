"""Pure-numpy implementations of the hot numeric kernels.

Every function here has a numba twin in ``_kernels_numba`` with identical
semantics; ``esgeo.kernels`` picks one of the two at import time.  Keep the
bodies simple, loop-based where the algorithm is sequential, and free of
Python objects so the numba twins can share the same source shape.
"""

from __future__ import annotations

import numpy as np


def gibbs_probs(energies: np.ndarray, beta: float) -> np.ndarray:
    """Thermal occupation probabilities exp(-beta*e_i)/Z, overflow-shifted."""
    w = -beta * (energies - energies[0])
    p = np.exp(w)
    return p / p.sum()


def log_partition(energies: np.ndarray, beta: float) -> float:
    """log sum_i exp(-beta*e_i) for the unshifted spectrum."""
    w = -beta * (energies - energies[0])
    return float(np.log(np.exp(w).sum()) - beta * energies[0])


def gibbs_energy_entropy(energies: np.ndarray, beta: float) -> tuple[float, float]:
    p = gibbs_probs(energies, beta)
    e = 0.0
    s = 0.0
    for i in range(energies.shape[0]):
        e += p[i] * energies[i]
        if p[i] > 0.0:
            s -= p[i] * np.log(p[i])
    return e, s


def solve_beta_for_energy(energies: np.ndarray, target: float, beta_cap: float) -> float:
    """Bisection on the strictly decreasing map beta -> E(gamma_beta).

    The bracket is [0, beta_cap]; the caller guarantees the target lies in
    the attainable range (E(beta_cap), mean(energies)].  Returns beta_cap if
    the target sits below what double precision can resolve.
    """
    lo = 0.0
    hi = beta_cap
    e_hi, _ = gibbs_energy_entropy(energies, hi)
    if target <= e_hi:
        return beta_cap
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        e_mid, _ = gibbs_energy_entropy(energies, mid)
        if e_mid > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * (1.0 + hi):
            break
    return 0.5 * (lo + hi)


def solve_beta_for_entropy(energies: np.ndarray, target: float, beta_cap: float) -> float:
    """Bisection on the strictly decreasing map beta -> S(gamma_beta)."""
    lo = 0.0
    hi = beta_cap
    _, s_hi = gibbs_energy_entropy(energies, hi)
    if target <= s_hi:
        return beta_cap
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        _, s_mid = gibbs_energy_entropy(energies, mid)
        if s_mid > target:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-14 * (1.0 + hi):
            break
    return 0.5 * (lo + hi)


def totally_ordered(eps: np.ndarray, s: np.ndarray, tol: float) -> bool:
    """True iff no pair has eps_a < eps_b - tol together with s_a > s_b + tol.

    Prefix-max sweep over the points sorted by eps: O(n log n) instead of the
    quadratic pairwise scan.
    """
    n = eps.shape[0]
    if n < 2:
        return True
    order = np.argsort(eps, kind="mergesort")
    ptr = 0
    prefix_max = -np.inf
    for j in range(n):
        ej = eps[order[j]]
        while eps[order[ptr]] < ej - tol:
            sp = s[order[ptr]]
            if sp > prefix_max:
                prefix_max = sp
            ptr += 1
        if prefix_max > s[order[j]] + tol:
            return False
    return True


def k_ensemble_points(eps: np.ndarray, s: np.ndarray, k: int, count: int) -> tuple[np.ndarray, np.ndarray]:
    """All points (1/k) sum_i c_i v_i over compositions c of k into len(eps) parts.

    ``count`` is C(k+m-1, m-1), precomputed by the caller (which also enforces
    the composition cap).  Points are returned without deduplication.
    """
    m = eps.shape[0]
    out_e = np.empty(count, dtype=np.float64)
    out_s = np.empty(count, dtype=np.float64)
    c = np.zeros(m, dtype=np.int64)
    c[0] = k
    idx = 0
    while True:
        acc_e = 0.0
        acc_s = 0.0
        for i in range(m):
            if c[i] > 0:
                acc_e += c[i] * eps[i]
                acc_s += c[i] * s[i]
        out_e[idx] = acc_e / k
        out_s[idx] = acc_s / k
        idx += 1
        if c[m - 1] == k:
            break
        # colex successor: move one unit from the first occupied slot rightward
        i = 0
        while c[i] == 0:
            i += 1
        v = c[i]
        c[i] = 0
        c[0] = v - 1
        c[i + 1] += 1
    return out_e, out_s


def convex_hull_indices(eps: np.ndarray, s: np.ndarray, tol: float) -> np.ndarray:
    """Monotone-chain hull of points already sorted lexicographically by (eps, s).

    Returns vertex indices ordered counterclockwise starting at the
    leftmost-lowest point (lower boundary left-to-right, then upper boundary
    right-to-left), which makes the trapezium area sum non-negative.  Points
    within ``tol`` of an edge (cross product) are dropped from the vertex
    list; they are face points, not vertices.
    """
    n = eps.shape[0]
    if n == 1:
        return np.zeros(1, dtype=np.int64)
    lower = np.empty(n, dtype=np.int64)
    nl = 0
    for i in range(n):
        while nl >= 2:
            o = lower[nl - 2]
            a = lower[nl - 1]
            cross = (eps[a] - eps[o]) * (s[i] - s[o]) - (s[a] - s[o]) * (eps[i] - eps[o])
            if cross <= tol:
                nl -= 1
            else:
                break
        lower[nl] = i
        nl += 1
    upper = np.empty(n, dtype=np.int64)
    nu = 0
    for j in range(n - 1, -1, -1):
        while nu >= 2:
            o = upper[nu - 2]
            a = upper[nu - 1]
            cross = (eps[a] - eps[o]) * (s[j] - s[o]) - (s[a] - s[o]) * (eps[j] - eps[o])
            if cross <= tol:
                nu -= 1
            else:
                break
        upper[nu] = j
        nu += 1
    out = np.empty(nl - 1 + nu - 1, dtype=np.int64)
    for i in range(nl - 1):
        out[i] = lower[i]
    for j in range(nu - 1):
        out[nl - 1 + j] = upper[j]
    return out


def qutrit_fiber_solve(
    eps: np.ndarray, energy: float, entropy: float, beta_cap: float
) -> tuple[np.ndarray, bool, np.ndarray, bool]:
    """Both passive 3-level states with the given (energy, entropy), if any.

    The constant-energy fiber through the Gibbs anchor is parametrised as
    p(t) = gamma + t*u with u = (e2-e3, e3-e1, e1-e2); entropy is strictly
    concave along it with its maximum at the anchor.  Each side of the anchor
    is scanned by bisection (entropy is monotone there) up to the boundary of
    the passive cone, then polished with a scalar Newton step.

    Returns (p_plus, ok_plus, p_minus, ok_minus) where the plus branch ends
    where the two lowest levels equalise (p1 = p2) and the minus branch where
    the two highest do (p2 = p3).
    """
    beta0 = solve_beta_for_energy(eps, energy, beta_cap)
    g = gibbs_probs(eps, beta0)
    u = np.empty(3, dtype=np.float64)
    u[0] = eps[1] - eps[2]
    u[1] = eps[2] - eps[0]
    u[2] = eps[0] - eps[1]
    # passive-cone boundaries along the fiber: ordering ties, or p3 hitting 0
    t_plus = (g[1] - g[0]) / (u[0] - u[1])
    t_zero = g[2] / (eps[1] - eps[0])
    if t_zero < t_plus:
        t_plus = t_zero
    t_minus = (g[2] - g[1]) / (u[1] - u[2])
    p_plus = np.empty(3, dtype=np.float64)
    p_minus = np.empty(3, dtype=np.float64)
    ok_plus = _fiber_branch(g, u, 0.0, t_plus, entropy, p_plus)
    ok_minus = _fiber_branch(g, u, 0.0, t_minus, entropy, p_minus)
    return p_plus, ok_plus, p_minus, ok_minus


def _fiber_entropy(g: np.ndarray, u: np.ndarray, t: float) -> float:
    s = 0.0
    for i in range(3):
        p = g[i] + t * u[i]
        if p > 0.0:
            s -= p * np.log(p)
    return s


def _fiber_branch(
    g: np.ndarray, u: np.ndarray, t_anchor: float, t_end: float, target: float, out: np.ndarray
) -> bool:
    """Bisect S(t)=target on [t_anchor, t_end]; S is monotone on the branch."""
    s_anchor = _fiber_entropy(g, u, t_anchor)
    s_end = _fiber_entropy(g, u, t_end)
    if target > s_anchor + 1e-12 or target < s_end - 1e-12:
        return False
    lo = t_anchor  # entropy high end
    hi = t_end     # entropy low end
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if _fiber_entropy(g, u, mid) > target:
            lo = mid
        else:
            hi = mid
        if abs(hi - lo) <= 1e-16 * (1.0 + abs(hi)):
            break
    t = 0.5 * (lo + hi)
    # scalar Newton polish on S(t) - target
    for _ in range(4):
        ds = 0.0
        for i in range(3):
            p = g[i] + t * u[i]
            if p > 0.0:
                ds -= u[i] * (np.log(p) + 1.0)
        if ds == 0.0:
            break
        step = (_fiber_entropy(g, u, t) - target) / ds
        t_new = t - step
        if t_end >= 0.0:
            if t_new < 0.0 or t_new > t_end:
                break
        else:
            if t_new > 0.0 or t_new < t_end:
                break
        t = t_new
    for i in range(3):
        out[i] = g[i] + t * u[i]
    return True


def newton_three_level_step(
    eps3: np.ndarray, s3: np.ndarray, p3: np.ndarray, de: float, ds: float
) -> np.ndarray:
    """One linear solve dp = M^{-1} (de, ds, 0) for a three-level subsystem.

    M has rows (eps, s, 1); its determinant is twice the signed area of the
    triangle spanned by the three (eps, s) points.
    """
    det = (
        eps3[0] * (s3[1] - s3[2])
        - eps3[1] * (s3[0] - s3[2])
        + eps3[2] * (s3[0] - s3[1])
    )
    dp = np.empty(3, dtype=np.float64)
    # Cramer columns for rhs (de, ds, 0)
    dp[0] = (de * (s3[1] - s3[2]) - ds * (eps3[1] - eps3[2])) / det
    dp[1] = (de * (s3[2] - s3[0]) - ds * (eps3[2] - eps3[0])) / det
    dp[2] = (de * (s3[0] - s3[1]) - ds * (eps3[0] - eps3[1])) / det
    return dp
