"""Activation trajectories: energy never up, entropy never down.

States are driven across the (E, S) plane toward the thermal curve by
repeatedly re-solving three chosen populations for a small exact move along
the tangent direction.  Each step logs the full measure set so monotonicity
can be audited afterwards.
"""

from __future__ import annotations

import io
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .athermality import ON_CURVE_SNAP, _triangle_area
from .ensemble import build_ensemble
from .geometry import (
    CompletelyPassiveError,
    area,
    convex_hull,
    is_completely_passive,
    select_virtual_qutrit,
)
from .spectra import (
    P_FLOOR,
    DiagonalState,
    MacroPoint,
    average_energy,
    is_passive,
    macro_point,
    passify,
    von_neumann_entropy,
)
from .thermo import (
    beta_cap,
    max_entropic_gain,
    max_extractable_work,
    min_beta_athermality,
)


class StepBelowFloorError(ValueError):
    """A step would push a population under the full-rank floor."""


class StepSolveError(RuntimeError):
    """The three-level solve could not reach the requested (E, S) target."""


@dataclass(frozen=True)
class TrajectorySpec:
    """Direction and step control for an activation trajectory.

    The tangent (u_E, u_S) must point weakly left and weakly up; it is
    normalized to unit length.  ``h`` is the arc length per step in the
    (E, S) plane, halved adaptively near obstructions down to ``h_min``.
    ``adapt=False`` switches to raw first-order steps without retries, a
    stress mode that deliberately accumulates discretization error.
    """

    tangent: tuple[float, float]
    h: float = 1e-3
    max_steps: int = 20_000
    dist_tol: float = 1e-6
    h_min: float = 1e-9
    adapt: bool = True

    def __post_init__(self):
        u_e, u_s = float(self.tangent[0]), float(self.tangent[1])
        if u_e > 0.0 or u_s < 0.0:
            raise ValueError("tangent must satisfy u_E <= 0 and u_S >= 0")
        norm = math.hypot(u_e, u_s)
        if norm == 0.0:
            raise ValueError("tangent must be non-zero")
        object.__setattr__(self, "tangent", (u_e / norm, u_s / norm))
        if self.h <= 0.0:
            raise ValueError("h must be positive")


@dataclass(frozen=True)
class TrajectoryStep:
    state: DiagonalState
    macro: MacroPoint
    area: float
    athermality: float
    w_max: float
    ds_max: float
    a_beta_min: float


@dataclass(frozen=True)
class TrajectoryRecord:
    spec: TrajectorySpec
    steps: tuple[TrajectoryStep, ...]
    terminated_reason: str


def random_tangent(rng: np.random.Generator) -> tuple[float, float]:
    """Uniform direction on the admissible quarter circle."""
    theta = rng.uniform(0.5 * math.pi, math.pi)
    return (math.cos(theta), math.sin(theta))


def partial_thermalization_step(
    state: DiagonalState, gamma: DiagonalState, p: float
) -> DiagonalState:
    """Convex mixture (1-p) state + p gamma with a thermal state.

    When gamma is the thermal state matching the state's energy the mixture
    conserves energy exactly (the energy functional is linear).
    """
    if state.spectrum != gamma.spectrum:
        raise ValueError("state and gamma live on different spectra")
    if not (0.0 <= p <= 1.0):
        raise ValueError("mixing weight must lie in [0, 1]")
    mixed = (1.0 - p) * state.probs + p * gamma.probs
    return DiagonalState(state.spectrum, mixed / mixed.sum())


def activation_step_state(
    state: DiagonalState,
    tangent: tuple[float, float],
    h: float,
    exact: bool = True,
    p_floor: float = P_FLOOR,
) -> DiagonalState:
    """Move the state by h*(u_E, u_S) in the (E, S) plane.

    Three populations chosen by the virtual-qutrit rule absorb the move.
    With ``exact`` set (default) the three-level system is re-solved by
    Newton iteration until the landing point matches the target to 1e-12,
    so energy and entropy move by exactly the requested amounts; otherwise a
    single linear solve is applied, which carries the usual second-order
    drift in entropy.

    Raises :class:`StepBelowFloorError` when the move would push a
    population below ``p_floor`` (the caller should shrink h) and
    :class:`~esgeo.geometry.CompletelyPassiveError` at the trajectory
    endpoint.
    """
    u_e, u_s = float(tangent[0]), float(tangent[1])
    norm = math.hypot(u_e, u_s)
    if norm == 0.0 or u_e > 0.0 or u_s < 0.0:
        raise ValueError("tangent must be non-zero with u_E <= 0 and u_S >= 0")
    u_e, u_s = u_e / norm, u_s / norm
    if h < 0.0:
        raise ValueError("h must be non-negative")
    if h == 0.0:
        return state
    qutrit = select_virtual_qutrit(state)
    eps = state.spectrum.energies
    idx = np.array(qutrit, dtype=np.intp)
    p = state.probs.copy()
    e_target = average_energy(state) + h * u_e
    s_target = von_neumann_entropy(state) + h * u_s
    e3 = eps[idx]
    scale = max(1.0, state.spectrum.span)
    converged = False
    for _ in range(20):
        p3 = p[idx]
        if p3.min() <= p_floor:
            raise StepBelowFloorError(
                f"population at levels {qutrit} reached the floor {p_floor}"
            )
        r_e = e_target - float(np.dot(p, eps))
        mask = p > 0.0
        r_s = s_target - float(-np.dot(p[mask], np.log(p[mask])))
        if abs(r_e) <= 1e-12 * scale and abs(r_s) <= 1e-12 * scale:
            converged = True
            break
        s3 = -np.log(p3)
        dp = kernels.newton_three_level_step(e3, s3, p3, r_e, r_s)
        damp = 1.0
        for _ in range(60):
            trial = p3 + damp * dp
            if trial.min() > p_floor:
                break
            damp *= 0.5
        else:
            raise StepBelowFloorError(
                f"population at levels {qutrit} cannot absorb the move"
            )
        p[idx] = p3 + damp * dp
        if not exact:
            converged = True
            break
    if not converged:
        raise StepSolveError(
            f"three-level solve did not reach ({e_target}, {s_target})"
        )
    if p.min() <= 0.0:
        raise StepBelowFloorError("step produced a non-positive population")
    p = p / p.sum()
    out = DiagonalState(state.spectrum, p)
    if not is_passive(out):
        warnings.warn(
            "activation step disturbed the passive ordering; re-sorting",
            stacklevel=2,
        )
        out, _ = passify(out)
    return out


def _exact_qutrit_athermality(state: DiagonalState, e: float, s: float) -> float:
    """Minimal-area value at (e, s) for a three-level spectrum, else NaN."""
    spectrum = state.spectrum
    if spectrum.dim != 3 or spectrum.is_degenerate:
        return math.nan
    eps = spectrum.energies
    if e >= spectrum.mean_energy:
        return 0.0
    b = kernels.solve_beta_for_energy(eps, e, beta_cap(spectrum))
    _, s_top = kernels.gibbs_energy_entropy(eps, float(b))
    if s >= float(s_top) - ON_CURVE_SNAP:
        return 0.0
    p_plus, ok_p, p_minus, ok_m = kernels.qutrit_fiber_solve(eps, e, s, beta_cap(spectrum))
    best = math.inf
    if ok_p:
        best = min(best, _triangle_area(eps, np.asarray(p_plus)))
    if ok_m:
        best = min(best, _triangle_area(eps, np.asarray(p_minus)))
    return best if math.isfinite(best) else math.nan


def _measures(state: DiagonalState) -> TrajectoryStep:
    mp = macro_point(state)
    if state.dim == 3 and not state.spectrum.is_degenerate:
        a = _triangle_area(state.spectrum.energies, state.probs)
    else:
        a = area(convex_hull(build_ensemble(state)))
    ath = _exact_qutrit_athermality(state, mp.E, mp.S)
    w = max_extractable_work(state)
    ds = max_entropic_gain(state)
    ab = min_beta_athermality(state).value
    return TrajectoryStep(state, mp, a, ath, w, ds, ab)


def integrate_trajectory(state0: DiagonalState, spec: TrajectorySpec) -> TrajectoryRecord:
    """Drive a passive state along the tangent until it meets the thermal curve.

    Steps are retried at half size whenever the three-level solve fails, a
    population hits the floor, or (for dimensions above three) the hull
    vertex set changes under the step; the step size recovers geometrically
    after successes.  Termination reasons: ``equilibrium`` (within
    ``dist_tol`` of the curve, measured by the smaller of the work and
    entropy gaps, or the state classifies as completely passive),
    ``stalled`` (h fell below ``h_min``), ``max_steps``.
    """
    state0.require_full_rank()
    if not is_passive(state0):
        raise ValueError("trajectory start must be passive")
    if state0.spectrum.is_degenerate:
        raise ValueError("trajectory integration needs a non-degenerate spectrum")
    steps: list[TrajectoryStep] = []
    state = state0
    h = spec.h
    reason = "max_steps"
    d = state0.dim
    while True:
        row = _measures(state)
        steps.append(row)
        if min(row.w_max, row.ds_max) <= spec.dist_tol:
            reason = "equilibrium"
            break
        if is_completely_passive(state):
            reason = "equilibrium"
            break
        if len(steps) > spec.max_steps:
            reason = "max_steps"
            break
        if not spec.adapt:
            try:
                state = activation_step_state(state, spec.tangent, h, exact=False)
            except (StepBelowFloorError, StepSolveError, CompletelyPassiveError):
                reason = "stalled"
                break
            continue
        advanced = False
        while h >= spec.h_min:
            try:
                candidate = activation_step_state(state, spec.tangent, h)
            except CompletelyPassiveError:
                reason = "equilibrium"
                advanced = False
                break
            except (StepBelowFloorError, StepSolveError):
                h *= 0.5
                continue
            if d > 3 and _hull_levels(candidate) != _hull_levels(state):
                h *= 0.5
                continue
            state = candidate
            h = min(2.0 * h, spec.h)
            advanced = True
            break
        if not advanced:
            if reason != "equilibrium":
                reason = "stalled"
            break
    return TrajectoryRecord(spec, tuple(steps), reason)


def _hull_levels(state: DiagonalState) -> frozenset[int]:
    ens = build_ensemble(state)
    idx = kernels.convex_hull_indices(ens.eps, ens.s, 1e-10)
    return frozenset(int(i) for i in idx)


@dataclass(frozen=True)
class Violation:
    kind: str
    step: int
    delta: float


@dataclass(frozen=True)
class MonotonicityReport:
    ok: bool
    violations: tuple[Violation, ...]
    slack: float


def verify_monotonicity(record: TrajectoryRecord, tol: float | None = None) -> MonotonicityReport:
    """Audit a trajectory for the expected decrease pattern.

    Checks, per consecutive step pair: the minimal-area measure, the maximal
    work and the maximal entropic gain are each non-increasing (within a
    slack of order h^2), and the area measure moves the same way as the two
    gap measures (their increments never have strictly opposite signs beyond
    the slack).
    """
    if len(record.steps) < 2:
        raise ValueError("record needs at least two steps")
    slack = tol if tol is not None else max(10.0 * record.spec.h ** 2, 1e-9)
    violations: list[Violation] = []
    rows = record.steps
    for i in range(len(rows) - 1):
        a0, a1 = rows[i].athermality, rows[i + 1].athermality
        d_ath = a1 - a0 if (math.isfinite(a0) and math.isfinite(a1)) else 0.0
        if d_ath > slack:
            violations.append(Violation("athermality_increase", i, d_ath))
        d_w = rows[i + 1].w_max - rows[i].w_max
        if d_w > slack:
            violations.append(Violation("w_max_increase", i, d_w))
        d_s = rows[i + 1].ds_max - rows[i].ds_max
        if d_s > slack:
            violations.append(Violation("ds_max_increase", i, d_s))
        if d_ath > slack and d_w < -slack or d_ath < -slack and d_w > slack:
            violations.append(Violation("area_work_comonotonicity", i, d_ath))
        if d_ath > slack and d_s < -slack or d_ath < -slack and d_s > slack:
            violations.append(Violation("area_entropy_comonotonicity", i, d_ath))
    return MonotonicityReport(not violations, tuple(violations), slack)


def record_to_csv(record: TrajectoryRecord) -> str:
    buf = io.StringIO()
    buf.write("step,E,S,area,athermality,W_max,dS_max,a_beta_min\n")
    for i, row in enumerate(record.steps):
        buf.write(
            f"{i},{row.macro.E:.17g},{row.macro.S:.17g},{row.area:.17g},"
            f"{row.athermality:.17g},{row.w_max:.17g},{row.ds_max:.17g},"
            f"{row.a_beta_min:.17g}\n"
        )
    return buf.getvalue()


def record_to_json_obj(record: TrajectoryRecord) -> dict:
    return {
        "spec": {
            "tangent": [record.spec.tangent[0], record.spec.tangent[1]],
            "h": record.spec.h,
            "max_steps": record.spec.max_steps,
            "dist_tol": record.spec.dist_tol,
            "h_min": record.spec.h_min,
            "adapt": record.spec.adapt,
        },
        "terminated_reason": record.terminated_reason,
        "steps": [
            {
                "step": i,
                "E": row.macro.E,
                "S": row.macro.S,
                "area": row.area,
                "athermality": row.athermality,
                "W_max": row.w_max,
                "dS_max": row.ds_max,
                "a_beta_min": row.a_beta_min,
                "probs": [float(x) for x in row.state.probs],
            }
            for i, row in enumerate(record.steps)
        ],
    }
