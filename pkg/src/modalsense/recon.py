"""Sparse-measurement field reconstruction through the mode basis.

Measurements taken at a subset of grid points are lifted back to the full
grid by solving for modal coefficients in least squares (gappy estimation),
and the log-determinant of the selected-row Gram matrix provides the
informativeness objective used by placement. All functions are pure and
thread-safe.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dmd import DmdModel
from .field import FieldSnapshot

__all__ = [
    "ObservationSet",
    "observe",
    "estimate_amplitudes",
    "reconstruct_full",
    "placement_objective",
]


@dataclass(frozen=True)
class ObservationSet:
    """Strictly increasing grid indices where measurements are taken."""

    indices: np.ndarray

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size < 1:
            raise ValueError("observation set must be a nonempty 1-d index sequence")
        if idx[0] < 0:
            raise ValueError("indices must be nonnegative")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise ValueError("indices must be strictly increasing (no duplicates)")
        object.__setattr__(self, "indices", idx)

    @property
    def n_obs(self) -> int:
        return self.indices.size


def _check_bounds(obs: ObservationSet, n_points: int) -> None:
    if obs.indices[-1] >= n_points:
        raise IndexError(
            f"observation index {obs.indices[-1]} outside grid of {n_points} points"
        )


def observe(s: FieldSnapshot, obs: ObservationSet) -> np.ndarray:
    """Field values at the observed indices, in index order."""
    _check_bounds(obs, len(s))
    return s.values[obs.indices]


def estimate_amplitudes(m: DmdModel, obs: ObservationSet, x_L) -> np.ndarray:
    """Least-squares modal coefficients from measurements at the observed rows.

    Solves ``modes[indices, :] @ a = x_L`` with a rank-revealing cutoff of
    1e-10, which keeps near-degenerate selections from blowing up.
    """
    _check_bounds(obs, m.n_points)
    x_L = np.asarray(x_L, dtype=float)
    if x_L.shape != (obs.n_obs,):
        raise ValueError(f"expected {obs.n_obs} measurements, got {x_L.shape}")
    sub = m.modes[obs.indices, :]
    if not np.any(sub):
        raise ValueError("no observable mode content at the selected indices")
    coeffs, *_ = np.linalg.lstsq(sub, x_L.astype(complex), rcond=1e-10)
    return coeffs


def reconstruct_full(m: DmdModel, obs: ObservationSet, x_L,
                     time: float = 0.0) -> FieldSnapshot:
    """Gappy estimate of the full field from sparse measurements.

    Exact (to solver precision) whenever the true field lies in the span of
    the modes and the selected rows have full column rank.
    """
    coeffs = estimate_amplitudes(m, obs, x_L)
    return FieldSnapshot((m.modes @ coeffs).real, time=time)


def placement_objective(m: DmdModel, obs: ObservationSet) -> float:
    """Log-determinant of the observed-row Gram matrix; -inf when singular.

    Larger values mean a smaller error ellipsoid for the estimated modal
    coefficients. The measurement-noise scale multiplies the error covariance
    uniformly and cancels in any argmax over selections, so it is omitted.
    """
    _check_bounds(obs, m.n_points)
    r = m.modes.shape[1]
    if obs.n_obs < r:
        return float("-inf")  # fewer rows than modes: Gram is singular
    sub = m.modes[obs.indices, :]
    gram = sub.conj().T @ sub
    eigs = np.linalg.eigvalsh(gram)
    if eigs[0] <= 0:
        return float("-inf")
    return float(np.sum(np.log(eigs)))
