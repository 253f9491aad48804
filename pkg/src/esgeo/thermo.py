"""Thermal-state machinery: solvers on the equilibrium curve and the
relative-entropy athermality measures built from them.

All inverse-temperature solves are bisections on strictly monotone maps with
the bracket [0, beta_cap], where beta_cap is the largest beta for which
exp(-beta * span) stays inside double range.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import kernels
from .spectra import (
    TOL_EPS,
    DiagonalState,
    EnergySpectrum,
    MacroPoint,
    average_energy,
    macro_point,
    von_neumann_entropy,
)


def beta_cap(spectrum: EnergySpectrum) -> float:
    """Largest useful inverse temperature before exp underflow."""
    return 700.0 / (spectrum.span + 1e-300)


def gibbs_state(spectrum: EnergySpectrum, beta: float) -> DiagonalState:
    """Thermal state p_i = exp(-beta e_i)/Z, computed with an energy shift.

    Betas beyond the underflow cap are clamped there, which returns the
    closest full-rank stand-in for the ground state that double precision
    supports.
    """
    if not np.isfinite(beta) or beta < 0.0:
        raise ValueError("beta must be finite and >= 0")
    b = min(beta, beta_cap(spectrum))
    p = kernels.gibbs_probs(spectrum.energies, b)
    return DiagonalState(spectrum, p / p.sum())


def solve_beta_for_energy(spectrum: EnergySpectrum, energy: float) -> float:
    """Inverse temperature whose thermal state has the given average energy.

    Valid for e_min < energy <= mean(e); the map beta -> E(gamma_beta) is
    strictly decreasing, so plain bisection converges.  Targets below what
    beta_cap can resolve saturate at beta_cap.
    """
    e = spectrum.energies
    if spectrum.span <= TOL_EPS:
        raise ValueError("spectrum carries a single energy; no temperature structure")
    mean = spectrum.mean_energy
    if energy > mean + 1e-12 or energy <= float(e[0]):
        raise ValueError(
            f"energy {energy} outside the attainable range ({float(e[0])}, {mean}]"
        )
    if energy >= mean:
        return 0.0
    return float(kernels.solve_beta_for_energy(e, energy, beta_cap(spectrum)))


def solve_beta_for_entropy(spectrum: EnergySpectrum, entropy: float) -> float:
    """Inverse temperature whose thermal state has the given entropy."""
    if spectrum.span <= TOL_EPS:
        raise ValueError("spectrum carries a single energy; no temperature structure")
    smax = math.log(spectrum.dim)
    if entropy > smax + 1e-12 or entropy <= 0.0:
        raise ValueError(f"entropy {entropy} outside the attainable range (0, {smax}]")
    if entropy >= smax:
        return 0.0
    return float(kernels.solve_beta_for_entropy(spectrum.energies, entropy, beta_cap(spectrum)))


def max_extractable_work(state: DiagonalState) -> float:
    """Energy gap to the equal-entropy thermal state.

    This is the per-copy work obtainable in the many-copy limit; zero exactly
    on the equilibrium curve.
    """
    e = average_energy(state)
    s = von_neumann_entropy(state)
    b = solve_beta_for_entropy(state.spectrum, s) if s > 0.0 else beta_cap(state.spectrum)
    e_gamma, _ = kernels.gibbs_energy_entropy(state.spectrum.energies, b)
    return max(e - float(e_gamma), 0.0)


def max_entropic_gain(state: DiagonalState) -> float:
    """Entropy gap to the equal-energy thermal state (thermalizing at fixed E)."""
    e = average_energy(state)
    s = von_neumann_entropy(state)
    if e >= state.spectrum.mean_energy:
        return max(math.log(state.dim) - s, 0.0)
    b = solve_beta_for_energy(state.spectrum, e)
    _, s_gamma = kernels.gibbs_energy_entropy(state.spectrum.energies, b)
    return max(float(s_gamma) - s, 0.0)


def beta_athermality(state: DiagonalState, beta: float) -> float:
    """Relative entropy from the state to the thermal state at ``beta``.

    Evaluated both directly (sum p (log p + beta e) + log Z) and through the
    free-energy difference beta*(E - E_gamma) + (S_gamma - S); the two must
    agree to 1e-10 and the direct value is returned.
    """
    if not np.isfinite(beta) or beta < 0.0:
        raise ValueError("beta must be finite and >= 0")
    b = min(beta, beta_cap(state.spectrum))
    e = state.spectrum.energies
    p = state.probs
    logz = kernels.log_partition(e, b)
    mask = p > 0.0
    direct = float(np.dot(p[mask], np.log(p[mask])) + b * np.dot(p, e) + logz)
    e_gamma, s_gamma = kernels.gibbs_energy_entropy(e, b)
    via_free_energy = (
        b * (average_energy(state) - float(e_gamma))
        + float(s_gamma)
        - von_neumann_entropy(state)
    )
    if abs(direct - via_free_energy) > 1e-10 * max(1.0, abs(direct)):
        raise ArithmeticError(
            f"athermality formulas disagree: {direct} vs {via_free_energy}"
        )
    return max(direct, 0.0)


class MinBetaAthermality(NamedTuple):
    """Argmin and value of the athermality over inverse temperatures.

    ``capped`` marks states so close to the ground level that the minimizer
    sits beyond the double-precision temperature cap (the beta -> infinity
    limit).
    """

    beta: float
    value: float
    capped: bool


def min_beta_athermality(state: DiagonalState) -> MinBetaAthermality:
    """Minimal relative-entropy distance to the set of thermal states.

    The minimizer is the inverse temperature matching the state's average
    energy; the minimal value equals the maximal entropic gain.
    """
    e = average_energy(state)
    spectrum = state.spectrum
    if spectrum.span <= TOL_EPS:
        return MinBetaAthermality(0.0, beta_athermality(state, 0.0), False)
    if e >= spectrum.mean_energy:
        return MinBetaAthermality(0.0, beta_athermality(state, 0.0), False)
    cap = beta_cap(spectrum)
    b = float(kernels.solve_beta_for_energy(spectrum.energies, e, cap))
    e_at_b, _ = kernels.gibbs_energy_entropy(spectrum.energies, b)
    # capped: the solver saturated and missed the target relative to its
    # own offset above the ground energy
    gap = max(e - float(spectrum.energies[0]), 5e-324)
    capped = b >= cap * (1.0 - 1e-9) and abs(float(e_at_b) - e) > 1e-6 * gap
    return MinBetaAthermality(b, beta_athermality(state, b), capped)


@dataclass(frozen=True)
class EquilibriumCurve:
    """Sampled thermal curve: beta ascending, E and S strictly decreasing."""

    betas: np.ndarray
    E: np.ndarray
    S: np.ndarray

    def __post_init__(self):
        for name in ("betas", "E", "S"):
            arr = np.asarray(getattr(self, name), dtype=np.float64).copy()
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def samples(self) -> list[tuple[float, MacroPoint]]:
        return [
            (float(b), MacroPoint(float(e), float(s)))
            for b, e, s in zip(self.betas, self.E, self.S)
        ]

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("beta,E,S\n")
        for b, e, s in zip(self.betas, self.E, self.S):
            buf.write(f"{b:.17g},{e:.17g},{s:.17g}\n")
        return buf.getvalue()


def equilibrium_curve(spectrum: EnergySpectrum, n_samples: int) -> EquilibriumCurve:
    """Thermal curve sampled at beta = 0 plus log-spaced betas.

    Runs from (mean energy, log d) at beta = 0 down to (ground energy, ~0)
    at the largest sampled beta.
    """
    if n_samples < 2:
        raise ValueError("n_samples must be >= 2")
    gaps = np.diff(spectrum.energies)
    gaps = gaps[gaps > TOL_EPS]
    if gaps.size == 0:
        raise ValueError("spectrum carries a single energy; no temperature structure")
    b_lo = 1e-3 / spectrum.span
    b_hi = min(beta_cap(spectrum), 60.0 / float(gaps.min()))
    betas = np.concatenate(
        [[0.0], np.logspace(math.log10(b_lo), math.log10(b_hi), n_samples - 1)]
    )
    E = np.empty(betas.size)
    S = np.empty(betas.size)
    for i, b in enumerate(betas):
        E[i], S[i] = kernels.gibbs_energy_entropy(spectrum.energies, float(b))
    return EquilibriumCurve(betas, E, S)


def equilibrium_distance(state_point: MacroPoint, spectrum: EnergySpectrum) -> float:
    """Conservative Euclidean distance from (E, S) to the thermal curve.

    Uses the smaller of the vertical and horizontal gaps to the curve, both
    of which dominate the true point-to-curve distance.
    """
    e, s = state_point
    vertical = math.inf
    if float(spectrum.energies[0]) < e <= spectrum.mean_energy:
        b = float(kernels.solve_beta_for_energy(spectrum.energies, e, beta_cap(spectrum)))
        _, s_gamma = kernels.gibbs_energy_entropy(spectrum.energies, b)
        vertical = abs(float(s_gamma) - s)
    elif e > spectrum.mean_energy:
        vertical = abs(math.log(spectrum.dim) - s) + (e - spectrum.mean_energy)
    horizontal = math.inf
    if 0.0 < s <= math.log(spectrum.dim):
        b = float(kernels.solve_beta_for_entropy(spectrum.energies, s, beta_cap(spectrum)))
        e_gamma, _ = kernels.gibbs_energy_entropy(spectrum.energies, b)
        horizontal = abs(e - float(e_gamma))
    return min(vertical, horizontal)
