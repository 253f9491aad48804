"""The area measure on the energy-entropy plane.

For a fixed spectrum, every feasible (E, S) pair labels a class of states;
the geometric athermality is the smallest hull area over the passive members
of that class.  Three-level systems are inverted exactly (at most two passive
states share an (E, S) pair, one per side of the constant-energy fiber
through the thermal anchor); higher dimensions fall back to a seeded
multistart minimizer whose output is an upper bound on the infimum.
"""

from __future__ import annotations

import hashlib
import io
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .ensemble import build_ensemble
from .geometry import area, convex_hull
from .spectra import (
    P_FLOOR,
    DiagonalState,
    EnergySpectrum,
    MacroPoint,
    average_energy,
    von_neumann_entropy,
)
from .thermo import beta_cap, gibbs_state, solve_beta_for_energy

TOL_ES = 1e-8
ON_CURVE_SNAP = 1e-10
FEAS_TOL = 1e-9


class InfeasibleRegionError(ValueError):
    """The requested (E, S) pair is not realised by any passive state."""


@dataclass(frozen=True)
class AthermalityResult:
    """Minimal (or best-found) hull area over the class of an (E, S) pair.

    ``method`` is ``exact_qutrit`` for the closed three-level inversion and
    ``multistart`` otherwise; multistart values are upper bounds on the
    infimum, which is all a local minimizer can certify.
    """

    value: float
    witness: DiagonalState
    constraint_residual: tuple[float, float]
    method: str
    starts_used: int

    @property
    def is_upper_bound(self) -> bool:
        return self.method == "multistart"


def _entropy_vec(p: np.ndarray) -> float:
    q = p[p > 0.0]
    return float(-np.dot(q, np.log(q)))


def _gibbs_entropy_at_energy(spectrum: EnergySpectrum, energy: float) -> float:
    if energy >= spectrum.mean_energy:
        return math.log(spectrum.dim)
    b = solve_beta_for_energy(spectrum, energy)
    _, s = kernels.gibbs_energy_entropy(spectrum.energies, b)
    return float(s)


def qutrit_state_from_macro(
    spectrum: EnergySpectrum,
    energy: float,
    entropy: float,
    branch: str = "min",
    near: np.ndarray | None = None,
) -> DiagonalState:
    """Passive three-level state with the requested average energy and entropy.

    The constant-energy fiber through the thermal anchor carries at most two
    passive solutions, one on each side of the anchor.  ``branch`` picks
    between them when both exist:

    - ``"min"``   the one whose ensemble hull has the smaller area (default,
      matching the infimum semantics of the area measure),
    - ``"near"``  the one closest to the probability vector ``near``,
    - ``"plus"``/``"minus"``  explicitly the side where the two lowest /
      two highest populations equalise.

    Points within a hair of the thermal curve return the thermal anchor
    itself.  Residuals are driven below 1e-10.
    """
    if spectrum.dim != 3:
        raise ValueError("exact inversion is specific to three-level spectra")
    if spectrum.is_degenerate:
        raise ValueError("inversion needs a non-degenerate spectrum")
    e = spectrum.energies
    if not (float(e[0]) < energy <= spectrum.mean_energy + 1e-12):
        raise InfeasibleRegionError(
            f"energy {energy} outside ({float(e[0])}, {spectrum.mean_energy}]"
        )
    s_top = _gibbs_entropy_at_energy(spectrum, energy)
    if entropy > s_top + FEAS_TOL:
        raise InfeasibleRegionError(
            f"entropy {entropy} above the thermal ceiling {s_top} at this energy"
        )
    if entropy >= s_top - ON_CURVE_SNAP:
        return gibbs_state(spectrum, solve_beta_for_energy(spectrum, energy))
    p_plus, ok_plus, p_minus, ok_minus = kernels.qutrit_fiber_solve(
        e, energy, entropy, beta_cap(spectrum)
    )
    candidates: list[np.ndarray] = []
    if ok_plus:
        candidates.append(np.asarray(p_plus))
    if ok_minus:
        candidates.append(np.asarray(p_minus))
    if not candidates:
        raise InfeasibleRegionError(
            f"(E, S) = ({energy}, {entropy}) lies below the passive region"
        )
    if branch == "plus":
        if not ok_plus:
            raise InfeasibleRegionError("no solution on the requested fiber side")
        pick = np.asarray(p_plus)
    elif branch == "minus":
        if not ok_minus:
            raise InfeasibleRegionError("no solution on the requested fiber side")
        pick = np.asarray(p_minus)
    elif branch == "near":
        if near is None:
            raise ValueError('branch="near" requires the near= probability vector')
        ref = np.asarray(near, dtype=np.float64)
        pick = min(candidates, key=lambda p: float(np.sum((p - ref) ** 2)))
    elif branch == "min":
        pick = min(candidates, key=lambda p: _triangle_area(e, p))
    else:
        raise ValueError(f"unknown branch {branch!r}")
    if pick.min() < P_FLOOR:
        raise InfeasibleRegionError(
            "solution sits on the rank-deficient boundary; its ensemble "
            "point escapes to infinity"
        )
    state = DiagonalState(spectrum, pick / pick.sum())
    r_e = abs(average_energy(state) - energy)
    r_s = abs(von_neumann_entropy(state) - entropy)
    if max(r_e, r_s) > 1e-10 * max(1.0, abs(energy), abs(entropy)):
        raise ArithmeticError(f"inversion residual too large: ({r_e}, {r_s})")
    return state


def _triangle_area(eps: np.ndarray, p: np.ndarray) -> float:
    if p.min() <= 0.0:
        return math.inf
    s = -np.log(p)
    cross = (eps[1] - eps[0]) * (s[2] - s[0]) - (s[1] - s[0]) * (eps[2] - eps[0])
    return 0.5 * abs(float(cross))


def passive_region_bounds(spectrum: EnergySpectrum, energy: float) -> tuple[float, float]:
    """Entropy range (S_min, S_max) of passive states at fixed energy.

    S_max is the thermal ceiling.  S_min is the exact infimum over the closed
    passive set: entropy is concave, so the minimum sits at an extreme point
    of the fixed-energy polytope, all of which have the two-plateau form
    (value a on a leading block, b on a trailing block, zeros after).  The
    infimum may be attained only by rank-deficient states.
    """
    e = spectrum.energies
    d = spectrum.dim
    if not (float(e[0]) - 1e-12 <= energy <= spectrum.mean_energy + 1e-12):
        raise ValueError(
            f"energy {energy} outside [{float(e[0])}, {spectrum.mean_energy}]"
        )
    if energy <= float(e[0]) + 1e-15:
        return 0.0, 0.0
    s_max = _gibbs_entropy_at_energy(spectrum, energy)
    s_min = math.inf
    cum = np.concatenate([[0.0], np.cumsum(e)])
    for i in range(1, d + 1):
        mean_i = cum[i] / i
        # single plateau: uniform on the first i levels
        if abs(mean_i - energy) <= 1e-12 * max(1.0, abs(energy)):
            s_min = min(s_min, math.log(i))
        for j in range(i + 1, d + 1):
            mean_tail = (cum[j] - cum[i]) / (j - i)
            denom = mean_tail - mean_i
            if abs(denom) <= 1e-15:
                continue
            w = (energy - mean_i) / denom  # tail-block total weight
            if not (0.0 <= w <= 1.0):
                continue
            a = (1.0 - w) / i
            b = w / (j - i)
            if b > a + 1e-15:
                continue  # would violate the non-increasing order
            s_val = 0.0
            if a > 0.0:
                s_val -= i * a * math.log(a)
            if b > 0.0:
                s_val -= (j - i) * b * math.log(b)
            s_min = min(s_min, s_val)
    if not math.isfinite(s_min):
        raise ArithmeticError("no extreme point matched the requested energy")
    return s_min, s_max


def geometric_athermality(
    spectrum: EnergySpectrum,
    energy: float,
    entropy: float,
    starts: int = 32,
    force_multistart: bool = False,
    extra_starts: list[np.ndarray] | None = None,
    seed_salt: int = 0,
) -> AthermalityResult:
    """Smallest ensemble-hull area over passive states with the given (E, S).

    Three-level spectra are solved exactly (no optimization); otherwise a
    seeded multistart local minimizer over the non-increasing simplex is run
    and the result is an upper bound on the infimum.  ``extra_starts`` may
    supply additional probability-vector starting points.
    """
    if spectrum.dim == 3 and not force_multistart:
        witness = qutrit_state_from_macro(spectrum, energy, entropy, branch="min")
        value = area(convex_hull(build_ensemble(witness)))
        r_e = abs(average_energy(witness) - energy)
        r_s = abs(von_neumann_entropy(witness) - entropy)
        return AthermalityResult(value, witness, (r_e, r_s), "exact_qutrit", 0)
    return _multistart_minimize(
        spectrum, energy, entropy, starts, extra_starts or [], seed_salt
    )


# ---------------------------------------------------------------------------
# multistart machinery (d > 3, or validation runs on d = 3)
# ---------------------------------------------------------------------------


def _ordered_from_weights(x: np.ndarray) -> np.ndarray:
    """Map non-negative weights to a non-increasing probability vector."""
    q = np.cumsum(x[::-1])[::-1]
    total = q.sum()
    if total <= 0.0:
        return np.full(x.size, 1.0 / x.size)
    return q / total


def _penalty_objective(x, spectrum, energy, entropy, weight):
    p = _ordered_from_weights(np.maximum(x, 0.0))
    a = _hull_area_of_probs(spectrum, p)
    r_e = float(np.dot(p, spectrum.energies)) - energy
    r_s = _entropy_vec(p) - entropy
    return a + weight * (r_e * r_e + r_s * r_s)


def _hull_area_of_probs(spectrum: EnergySpectrum, p: np.ndarray) -> float:
    q = np.maximum(p, 1e-300)
    s = -np.log(q)
    idx = kernels.convex_hull_indices(
        np.ascontiguousarray(spectrum.energies), np.ascontiguousarray(s), 1e-10
    )
    if idx.size <= 2:
        return 0.0
    e_v = spectrum.energies[idx]
    s_v = s[idx]
    n = idx.size
    terms = [s_v[k] * (e_v[(k - 1) % n] - e_v[(k + 1) % n]) for k in range(n)]
    return 0.5 * math.fsum(terms)


def _pattern_search(fun, x0, step, budget):
    x = x0.copy()
    fx = fun(x)
    d = x.size
    evals = 0
    while evals < budget and step > 1e-7:
        improved = False
        for i in range(d):
            for sgn in (1.0, -1.0):
                trial = x.copy()
                trial[i] = max(trial[i] + sgn * step, 0.0)
                ft = fun(trial)
                evals += 1
                if ft < fx - 1e-15:
                    x, fx = trial, ft
                    improved = True
                    break
            if evals >= budget:
                break
        if not improved:
            step *= 0.5
    return x, fx


def _restore_constraints(
    spectrum: EnergySpectrum, p: np.ndarray, energy: float, entropy: float
) -> np.ndarray | None:
    """Minimum-norm damped Newton onto the (E, S, normalization) manifold."""
    e = spectrum.energies
    p = p.copy()
    for _ in range(60):
        mask = p > 0.0
        s_now = float(-np.dot(p[mask], np.log(p[mask])))
        r = np.array(
            [energy - float(np.dot(p, e)), entropy - s_now, 1.0 - float(p.sum())]
        )
        if np.max(np.abs(r)) <= 1e-13:
            return p
        q = np.maximum(p, 1e-300)
        jac = np.stack([e, -np.log(q) - 1.0, np.ones_like(e)])
        try:
            dp = jac.T @ np.linalg.solve(jac @ jac.T, r)
        except np.linalg.LinAlgError:
            return None
        scale = 1.0
        floor = 0.25 * P_FLOOR
        for _ in range(60):
            trial = p + scale * dp
            if trial.min() > floor:
                break
            scale *= 0.5
        else:
            return None
        p = p + scale * dp
    mask = p > 0.0
    s_now = float(-np.dot(p[mask], np.log(p[mask])))
    if (
        abs(energy - float(np.dot(p, e))) <= TOL_ES
        and abs(entropy - s_now) <= TOL_ES
        and abs(1.0 - float(p.sum())) <= 1e-12
    ):
        return p
    return None


def _restore_passive(spectrum, p, energy, entropy):
    """Restore the constraints and end on a non-increasing vector, or None.

    Restoration may introduce tiny ordering inversions; re-sorting moves the
    constraints by at most the inversion size, so sort-and-restore is
    iterated until both hold.
    """
    current = np.asarray(p, dtype=np.float64)
    for _ in range(6):
        restored = _restore_constraints(spectrum, current, energy, entropy)
        if restored is None:
            return None
        worst = float(np.max(np.diff(restored))) if restored.size > 1 else 0.0
        if worst <= 1e-12:
            return np.sort(restored)[::-1] if worst > 0.0 else restored
        current = np.sort(restored)[::-1]
    return None


def _manifold_descent(spectrum, p, energy, entropy, rng, rounds=40):
    """Line searches along the constraint null space, restoring after each move."""
    e = spectrum.energies
    best = p
    best_a = _hull_area_of_probs(spectrum, p)
    step = 0.05
    for _ in range(rounds):
        q = np.maximum(best, 1e-300)
        jac = np.stack([e, -np.log(q) - 1.0, np.ones_like(e)])
        _, _, vt = np.linalg.svd(jac, full_matrices=True)
        null = vt[3:]
        if null.shape[0] == 0:
            break
        improved = False
        directions = list(null)
        if null.shape[0] > 1:
            mix = rng.standard_normal(null.shape[0])
            directions.append(mix @ null)
        for v in directions:
            for sgn in (1.0, -1.0):
                trial = best + sgn * step * v
                if trial.min() <= 0.0:
                    continue
                restored = _restore_passive(spectrum, trial, energy, entropy)
                if restored is None:
                    continue
                a = _hull_area_of_probs(spectrum, restored)
                if a < best_a - 1e-14:
                    best, best_a = restored, a
                    improved = True
        if not improved:
            step *= 0.5
            if step < 1e-6:
                break
    return best, best_a


def _seed_rng(spectrum, energy, entropy, seed_salt, start_index):
    h = hashlib.sha256()
    h.update(spectrum.energies.tobytes())
    h.update(np.float64(energy).tobytes())
    h.update(np.float64(entropy).tobytes())
    h.update(np.int64(seed_salt).tobytes())
    h.update(np.int64(start_index).tobytes())
    return np.random.default_rng(int.from_bytes(h.digest()[:8], "little"))


def _multistart_minimize(spectrum, energy, entropy, starts, extra_starts, seed_salt):
    d = spectrum.dim
    s_min, s_max = passive_region_bounds(spectrum, energy)
    if entropy > s_max + FEAS_TOL or entropy < s_min - FEAS_TOL:
        raise InfeasibleRegionError(
            f"(E, S) = ({energy}, {entropy}) outside the passive region"
        )
    if entropy >= s_max - ON_CURVE_SNAP:
        witness = gibbs_state(spectrum, solve_beta_for_energy(spectrum, energy))
        value = area(convex_hull(build_ensemble(witness)))
        return AthermalityResult(value, witness, (0.0, 0.0), "multistart", 0)
    best_p = None
    best_a = math.inf
    starts_used = 0
    seeds: list[np.ndarray] = []
    for p0 in extra_starts:
        seeds.append(np.sort(np.asarray(p0, dtype=np.float64))[::-1])
    b_anchor = solve_beta_for_energy(spectrum, energy)
    seeds.append(gibbs_state(spectrum, b_anchor).probs.copy())
    for i in range(starts):
        rng = _seed_rng(spectrum, energy, entropy, seed_salt, i)
        x0 = rng.gamma(1.0, 1.0, size=d)
        for weight in (1e2, 1e4, 1e6):
            x0, _ = _pattern_search(
                lambda x: _penalty_objective(x, spectrum, energy, entropy, weight),
                x0,
                step=0.25,
                budget=250,
            )
        seeds.append(_ordered_from_weights(np.maximum(x0, 0.0)))
    for i, p0 in enumerate(seeds):
        starts_used += 1
        restored = _restore_passive(spectrum, p0, energy, entropy)
        if restored is None:
            continue
        rng = _seed_rng(spectrum, energy, entropy, seed_salt, 10_000 + i)
        p_loc, a_loc = _manifold_descent(spectrum, restored, energy, entropy, rng)
        if a_loc < best_a:
            best_p, best_a = p_loc, a_loc
    if best_p is None:
        raise InfeasibleRegionError(
            f"no feasible passive state found at (E, S) = ({energy}, {entropy})"
        )
    if best_p.min() < P_FLOOR:
        fixed = _restore_passive(
            spectrum, np.maximum(best_p, 2.0 * P_FLOOR), energy, entropy
        )
        if fixed is None:
            raise InfeasibleRegionError(
                "optimum sits on the rank-deficient boundary of the region"
            )
        best_p = fixed
    witness = DiagonalState(spectrum, best_p / best_p.sum())
    value = area(convex_hull(build_ensemble(witness)))
    r_e = abs(average_energy(witness) - energy)
    r_s = abs(von_neumann_entropy(witness) - entropy)
    return AthermalityResult(value, witness, (r_e, r_s), "multistart", starts_used)


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AthermalityGrid:
    """Raster of the area measure over an (E, S) window.

    ``values[i, j]`` holds the measure at (E_axis[i], S_axis[j]); cells
    outside the passive region are NaN.  Values are stored unrescaled; the
    monotone rescale 1 - exp(-x) is applied on export when ``rescale`` is
    set.
    """

    E_axis: np.ndarray
    S_axis: np.ndarray
    values: np.ndarray
    rescale: bool = False

    def __post_init__(self):
        for name in ("E_axis", "S_axis", "values"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def rescaled_values(self) -> np.ndarray:
        return 1.0 - np.exp(-self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        header = "E,S,athermality" + (",rescaled" if self.rescale else "")
        buf.write(header + "\n")
        resc = self.rescaled_values if self.rescale else None
        for i, e in enumerate(self.E_axis):
            for j, s in enumerate(self.S_axis):
                row = f"{e:.17g},{s:.17g},{self.values[i, j]:.17g}"
                if self.rescale:
                    row += f",{resc[i, j]:.17g}"
                buf.write(row + "\n")
        return buf.getvalue()

    def to_json_obj(self) -> dict:
        obj = {
            "E_axis": [float(x) for x in self.E_axis],
            "S_axis": [float(x) for x in self.S_axis],
            "values": [[float(v) for v in row] for row in self.values],
        }
        if self.rescale:
            obj["rescaled_values"] = [
                [float(v) for v in row] for row in self.rescaled_values
            ]
        return obj


def athermality_grid(
    spectrum: EnergySpectrum,
    E_range: tuple[float, float],
    S_range: tuple[float, float],
    nE: int = 101,
    nS: int = 101,
    rescale: bool = False,
) -> AthermalityGrid:
    """Evaluate the area measure on a uniform (E, S) grid.

    Out-of-region nodes are NaN; nodes coinciding with the thermal curve get
    the exact zero of the thermal witness.  Three-level spectra use the fast
    exact inversion per cell.
    """
    if nE < 2 or nS < 2:
        raise ValueError("grid resolutions must be >= 2")
    e_axis = np.linspace(E_range[0], E_range[1], nE)
    s_axis = np.linspace(S_range[0], S_range[1], nS)
    values = np.full((nE, nS), np.nan)
    e0 = float(spectrum.energies[0])
    emean = spectrum.mean_energy
    cap = beta_cap(spectrum)
    eps = spectrum.energies
    for i, e_val in enumerate(e_axis):
        if e_val <= e0 or e_val > emean + 1e-12:
            continue
        s_top = _gibbs_entropy_at_energy(spectrum, float(e_val))
        s_bot, _ = passive_region_bounds(spectrum, float(e_val))
        for j, s_val in enumerate(s_axis):
            if s_val > s_top + FEAS_TOL or s_val < s_bot - FEAS_TOL:
                continue
            if s_val >= s_top - ON_CURVE_SNAP:
                values[i, j] = 0.0
                continue
            if spectrum.dim == 3:
                p_plus, ok_p, p_minus, ok_m = kernels.qutrit_fiber_solve(
                    eps, float(e_val), float(s_val), cap
                )
                best = math.inf
                if ok_p:
                    best = min(best, _triangle_area(eps, np.asarray(p_plus)))
                if ok_m:
                    best = min(best, _triangle_area(eps, np.asarray(p_minus)))
                if math.isfinite(best):
                    values[i, j] = best
            else:
                try:
                    values[i, j] = geometric_athermality(
                        spectrum, float(e_val), float(s_val)
                    ).value
                except InfeasibleRegionError:
                    pass
    return AthermalityGrid(e_axis, s_axis, values, rescale)
