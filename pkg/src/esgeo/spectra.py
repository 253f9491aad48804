"""Energy spectra and diagonal states.

A finite-dimensional system is described here by its energy eigenvalues and a
probability vector over them; everything downstream (ensembles, hulls,
thermal solvers) is built from these two arrays.  All operations are pure
functions on immutable values.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

TOL_NORM = 1e-12
TOL_ORDER = 1e-12
TOL_EPS = 1e-12
P_FLOOR = 1e-15


class NotFullRankError(ValueError):
    """A probability sits below the full-rank floor; regularize first."""


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.asarray(a, dtype=np.float64).copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class EnergySpectrum:
    """Hamiltonian eigenvalues, sorted non-decreasing.

    Parameters
    ----------
    energies : array_like
        Real eigenvalues in non-decreasing order (dimensionless units).
    """

    energies: np.ndarray

    def __post_init__(self):
        arr = _readonly(self.energies)
        if arr.ndim != 1 or arr.size < 1:
            raise ValueError("energies must be a non-empty 1-d sequence")
        if not np.all(np.isfinite(arr)):
            raise ValueError("energies must be finite")
        if np.any(np.diff(arr) < 0):
            raise ValueError("energies must be sorted non-decreasing")
        object.__setattr__(self, "energies", arr)

    @property
    def dim(self) -> int:
        return int(self.energies.size)

    @property
    def is_degenerate(self) -> bool:
        if self.dim < 2:
            return False
        return bool(np.any(np.diff(self.energies) <= TOL_EPS))

    @property
    def span(self) -> float:
        return float(self.energies[-1] - self.energies[0])

    @property
    def mean_energy(self) -> float:
        """Average energy of the maximally mixed state."""
        return float(self.energies.mean())

    def degenerate_blocks(self) -> list[tuple[int, int]]:
        """Maximal runs of equal energies as half-open index ranges."""
        blocks = []
        start = 0
        for i in range(1, self.dim):
            if self.energies[i] - self.energies[i - 1] > TOL_EPS:
                blocks.append((start, i))
                start = i
        blocks.append((start, self.dim))
        return blocks

    def __eq__(self, other) -> bool:
        return isinstance(other, EnergySpectrum) and np.array_equal(
            self.energies, other.energies
        )

    def __hash__(self):
        return hash(self.energies.tobytes())


@dataclass(frozen=True)
class DiagonalState:
    """Probability vector over the levels of a spectrum.

    Exact zeros are permitted at construction so that rank-deficient inputs
    can be regularized; operations that need a full-rank state (anything that
    takes a logarithm per level) raise :class:`NotFullRankError` instead of
    clipping silently.
    """

    spectrum: EnergySpectrum
    probs: np.ndarray

    def __post_init__(self):
        arr = _readonly(self.probs)
        if arr.ndim != 1:
            raise ValueError("probs must be 1-d")
        if arr.size != self.spectrum.dim:
            raise ValueError(
                f"dimension mismatch: {arr.size} probabilities for "
                f"{self.spectrum.dim} levels"
            )
        if not np.all(np.isfinite(arr)):
            raise ValueError("probs must be finite")
        if np.any(arr < 0.0) or np.any(arr > 1.0 + TOL_NORM):
            raise ValueError("probs must lie in [0, 1]")
        if abs(float(arr.sum()) - 1.0) > TOL_NORM:
            raise ValueError(f"probs must sum to 1 within {TOL_NORM}")
        object.__setattr__(self, "probs", arr)

    @property
    def dim(self) -> int:
        return self.spectrum.dim

    @property
    def is_full_rank(self) -> bool:
        return bool(self.probs.min() >= P_FLOOR)

    def require_full_rank(self) -> None:
        if not self.is_full_rank:
            raise NotFullRankError(
                f"state has a probability below {P_FLOOR}; apply "
                "full_rank_regularize before building ensembles"
            )


class MacroPoint(NamedTuple):
    """Average energy and von Neumann entropy (nats) of a state."""

    E: float
    S: float


def is_passive(state: DiagonalState, tol_order: float = TOL_ORDER, tol_eps: float = TOL_EPS) -> bool:
    """Whether no permutation of the populations can lower the average energy.

    For strictly increasing energies this is the anti-ordering condition
    p_i >= p_j whenever e_i < e_j; inside a degenerate energy block any
    ordering is accepted, but every probability of a lower block must still
    dominate every probability of a higher block.
    """
    p = state.probs
    running_min = np.inf
    for lo, hi in state.spectrum.degenerate_blocks():
        block = p[lo:hi]
        if float(block.max()) > running_min + tol_order:
            return False
        running_min = min(running_min, float(block.min()))
    return True


def passify(state: DiagonalState) -> tuple[DiagonalState, np.ndarray]:
    """Sort populations non-increasing against the ascending energies.

    Returns the energy-minimizing arrangement together with the applied
    permutation ``perm`` (new_probs[i] = probs[perm[i]]).  Ties keep their
    original relative order, so an already-passive canonical state maps to
    itself with the identity permutation.
    """
    perm = np.argsort(-state.probs, kind="stable")
    out = DiagonalState(state.spectrum, state.probs[perm])
    return out, perm


def average_energy(state: DiagonalState) -> float:
    return float(np.dot(state.probs, state.spectrum.energies))


def von_neumann_entropy(state: DiagonalState) -> float:
    """-sum p log p in nats, with the 0 log 0 = 0 convention."""
    p = state.probs[state.probs > 0.0]
    return float(-np.dot(p, np.log(p)))


def macro_point(state: DiagonalState) -> MacroPoint:
    return MacroPoint(average_energy(state), von_neumann_entropy(state))


def single_shot_ergotropy(state: DiagonalState) -> float:
    """Maximal energy extractable by a single permutation of populations.

    Equals the gap between the state's energy and the energy of its passified
    arrangement; zero exactly when the state is already passive.
    """
    passified, _ = passify(state)
    w = average_energy(state) - average_energy(passified)
    return max(w, 0.0)


def full_rank_regularize(state: DiagonalState, delta: float) -> DiagonalState:
    """Mix with the maximally mixed state: p -> (1-delta) p + delta/d.

    Monotone in each probability, hence preserves the passivity ordering;
    the output floor is delta/d.
    """
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    p = (1.0 - delta) * state.probs + delta / state.dim
    p = p / p.sum()
    return DiagonalState(state.spectrum, p)


def load_state_file(path: str, normalize: bool = True):
    """Read a JSON state spec {"energies": [...], "probs": [...]}.

    Returns a :class:`DiagonalState`, or an :class:`EnergySpectrum` when the
    file carries no probabilities.  Unnormalized probabilities are rescaled
    with a warning when ``normalize`` is set.
    """
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return state_from_spec(payload, normalize=normalize)


def state_from_spec(payload: dict, normalize: bool = True):
    if not isinstance(payload, dict) or "energies" not in payload:
        raise ValueError('state spec must be a JSON object with an "energies" field')
    spectrum = EnergySpectrum(np.asarray(payload["energies"], dtype=np.float64))
    if "probs" not in payload or payload["probs"] is None:
        return spectrum
    probs = np.asarray(payload["probs"], dtype=np.float64)
    total = float(probs.sum())
    if abs(total - 1.0) > TOL_NORM:
        if not normalize:
            raise ValueError(f"probs sum to {total}, not 1")
        if total <= 0.0 or not np.isfinite(total):
            raise ValueError("probs must have a positive finite sum")
        warnings.warn(
            f"probs sum to {total:.6g}; normalizing to 1", stacklevel=2
        )
        probs = probs / total
    return DiagonalState(spectrum, probs)
