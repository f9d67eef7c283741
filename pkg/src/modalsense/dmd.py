"""Batch dynamic mode decomposition.

Snapshot-pair assembly, truncated SVD with a configurable rank policy, the
reduced one-step operator and its eigendecomposition, spatial modes,
amplitudes, and reconstruction/prediction. Everything here is a pure
function over immutable inputs; a fitted model can be shared freely across
threads.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .field import FieldSnapshot, SnapshotSeries
from .matrixio import load_container, save_container

__all__ = [
    "RankPolicy",
    "SnapshotPair",
    "DmdModel",
    "make_pair",
    "truncated_svd",
    "fit_dmd",
    "reconstruct",
    "reconstruct_at",
    "continuous_eigenvalues",
    "save_model",
    "load_model",
]

MODE_ORDERING = "amplitude_times_eigenvalue"
_VERSION = "0.1.0"


@dataclass(frozen=True)
class RankPolicy:
    """Truncation rule for SVD-based model fitting.

    Singular values with ``sigma_i / sigma_0 > rel_tol`` are kept; if
    ``fixed`` is set the retained rank is additionally capped at that value.
    """

    fixed: int | None = None
    rel_tol: float = 1e-10

    def select(self, sigma: np.ndarray) -> int:
        sigma = np.asarray(sigma)
        if sigma.size == 0 or sigma[0] <= 0:
            raise ValueError("cannot truncate an all-zero spectrum")
        r = int(np.sum(sigma / sigma[0] > self.rel_tol))
        if self.fixed is not None:
            if self.fixed < 1:
                raise ValueError("fixed rank must be at least 1")
            r = min(r, self.fixed)
        return max(r, 1)


@dataclass(frozen=True)
class SnapshotPair:
    """Time-shifted snapshot matrices with columns related by one step."""

    X: np.ndarray
    Y: np.ndarray
    dt: float

    def __post_init__(self):
        X = np.asarray(self.X, dtype=float)
        Y = np.asarray(self.Y, dtype=float)
        if X.ndim != 2 or Y.ndim != 2 or X.shape != Y.shape:
            raise ValueError("X and Y must be 2-d arrays of equal shape")
        if X.shape[1] < 1:
            raise ValueError("snapshot pair needs at least one column")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)

    @property
    def n_points(self) -> int:
        return self.X.shape[0]

    @property
    def n_columns(self) -> int:
        return self.X.shape[1]


def make_pair(series: SnapshotSeries) -> SnapshotPair:
    """Split a series into the leading/trailing snapshot matrices."""
    if len(series) < 2:
        raise ValueError("need at least two snapshots to form a pair")
    m = series.matrix()
    return SnapshotPair(m[:, :-1], m[:, 1:], series.dt)


def truncated_svd(M, policy: RankPolicy = RankPolicy()):
    """Rank-truncated SVD ``M ~ U diag(sigma) W^T``."""
    M = np.asarray(M, dtype=float)
    if not np.any(M):
        raise ValueError("cannot decompose an all-zero matrix")
    U, sigma, Wt = np.linalg.svd(M, full_matrices=False)
    r = policy.select(sigma)
    return U[:, :r], sigma[:r], Wt[:r, :].T


@dataclass(frozen=True)
class DmdModel:
    """Spatial modes with their discrete-time spectrum and amplitudes.

    ``modes @ diag(eigenvalues**t) @ amplitudes`` evolves the field ``t``
    steps from the snapshot the amplitudes were anchored to (the first
    snapshot for batch fits). Models built from a full operator
    eigendecomposition carry no SVD factors (``svd_u`` etc. are None).

    Eigenvalue ordering: descending ``|amplitude * eigenvalue|``, ties broken
    by descending ``|eigenvalue|``, then by real and imaginary parts, so the
    leading entry is the dominant dynamic component.
    """

    modes: np.ndarray
    eigenvalues: np.ndarray
    amplitudes: np.ndarray
    dt: float
    rank: int
    svd_u: np.ndarray | None = None
    svd_sigma: np.ndarray | None = None
    svd_w: np.ndarray | None = None
    span_residual: float = 0.0

    @property
    def n_points(self) -> int:
        return self.modes.shape[0]


def _spectrum_order(eigenvalues: np.ndarray, amplitudes: np.ndarray,
                    rel_tol: float = 1e-9) -> np.ndarray:
    """Descending |amplitude * eigenvalue| with tolerance-grouped ties.

    Dominance values within ``rel_tol`` of a group's leader (relative to the
    largest dominance) count as tied and fall through to |eigenvalue|, then
    real and imaginary parts, keeping the ordering stable under roundoff.
    """
    lam = np.asarray(eigenvalues)
    amp = np.asarray(amplitudes)
    dominance = np.abs(amp) * np.abs(lam)
    order = np.argsort(-dominance, kind="stable")
    threshold = rel_tol * max(float(dominance[order[0]]), 1e-300)
    groups = [[order[0]]]
    leader = dominance[order[0]]
    for idx in order[1:]:
        if leader - dominance[idx] <= threshold:
            groups[-1].append(idx)
        else:
            groups.append([idx])
            leader = dominance[idx]
    final = []
    for group in groups:
        g = np.asarray(group)
        sub = np.lexsort((-lam[g].imag, -lam[g].real, -np.abs(lam[g])))
        final.extend(g[sub].tolist())
    return np.asarray(final)


def _solve_amplitudes(modes: np.ndarray, anchor: np.ndarray) -> np.ndarray:
    anchor = anchor.astype(complex)
    if modes.shape[0] == modes.shape[1]:
        # square mode matrices (full-operator models) admit a direct solve
        try:
            return np.linalg.solve(modes, anchor)
        except np.linalg.LinAlgError:
            pass
    amps, *_ = np.linalg.lstsq(modes, anchor, rcond=1e-10)
    return amps


def assemble_model(modes, eigenvalues, anchor, dt, rank, svd_u=None,
                   svd_sigma=None, svd_w=None, span_residual=0.0) -> DmdModel:
    """Order the spectrum and solve amplitudes against ``anchor``."""
    amps = _solve_amplitudes(modes, anchor)
    order = _spectrum_order(eigenvalues, amps)
    return DmdModel(
        modes=modes[:, order],
        eigenvalues=np.asarray(eigenvalues)[order],
        amplitudes=amps[order],
        dt=dt,
        rank=rank,
        svd_u=svd_u,
        svd_sigma=svd_sigma,
        svd_w=svd_w,
        span_residual=span_residual,
    )


def fit_dmd(pair: SnapshotPair, policy: RankPolicy = RankPolicy()) -> DmdModel:
    """Fit a reduced-order one-step model to a snapshot pair.

    The reduced operator is ``U^T Y W Sigma^-1``; modes are recovered as
    ``Y W Sigma^-1 V`` from its eigenvectors, and amplitudes solve
    ``modes @ a = x(0)`` in least squares. ``span_residual`` reports
    ``||Y - U U^T Y||_F / ||Y||_F`` as a diagnostic of how well the trailing
    snapshots live in the span of the leading ones; models are not rejected
    on it.
    """
    if not np.any(pair.X):
        raise ValueError("cannot fit a model to all-zero data")
    U, sigma, W = truncated_svd(pair.X, policy)
    ywsi = (pair.Y @ W) / sigma  # Y W Sigma^-1, shape (N, r)
    a_hat = U.T @ ywsi
    lam, V = np.linalg.eig(a_hat)
    modes = ywsi @ V
    y_norm = np.linalg.norm(pair.Y)
    span_res = 0.0
    if y_norm > 0:
        span_res = float(np.linalg.norm(pair.Y - U @ (U.T @ pair.Y)) / y_norm)
    return assemble_model(
        modes, lam, pair.X[:, 0], pair.dt, len(sigma),
        svd_u=U, svd_sigma=sigma, svd_w=W, span_residual=span_res,
    )


def reconstruct(m: DmdModel, t_index: int) -> FieldSnapshot:
    """Real part of the modal evolution ``t_index`` steps from the anchor."""
    if t_index < 0:
        raise ValueError("t_index must be nonnegative")
    values = (m.modes * m.eigenvalues**t_index) @ m.amplitudes
    return FieldSnapshot(values.real, time=t_index * m.dt)


def reconstruct_at(m: DmdModel, t_seconds: float) -> np.ndarray:
    """Continuous-time evaluation ``t_seconds`` after the anchor snapshot.

    Uses the principal fractional power of the eigenvalues, which agrees
    with :func:`reconstruct` at integer multiples of ``dt``.
    """
    power = t_seconds / m.dt
    lam_t = np.where(m.eigenvalues == 0, 0.0 if power > 0 else 1.0,
                     m.eigenvalues**power)
    return ((m.modes * lam_t) @ m.amplitudes).real


def continuous_eigenvalues(m: DmdModel) -> np.ndarray:
    """Map the discrete spectrum to continuous time: ``log(lambda) / dt``."""
    if np.any(m.eigenvalues == 0):
        raise ValueError("zero eigenvalue has no continuous-time counterpart")
    return np.log(m.eigenvalues) / m.dt


def save_model(path, m: DmdModel) -> None:
    meta = {
        "kind": "dmd_model",
        "rank": int(m.rank),
        "dt": m.dt,
        "ordering": MODE_ORDERING,
        "span_residual": m.span_residual,
        "version": _VERSION,
        "has_svd": m.svd_u is not None,
    }
    arrays = {
        "modes": m.modes,
        "eigenvalues": m.eigenvalues,
        "amplitudes": m.amplitudes,
    }
    if m.svd_u is not None:
        arrays["svd_u"] = m.svd_u
        arrays["svd_sigma"] = m.svd_sigma
        arrays["svd_w"] = m.svd_w
    save_container(path, meta, arrays)


def load_model(path) -> DmdModel:
    meta, arrays = load_container(path)
    if meta.get("kind") != "dmd_model":
        raise ValueError(f"{path}: not a model file")
    has_svd = meta.get("has_svd", False)
    return DmdModel(
        modes=arrays["modes"],
        eigenvalues=arrays["eigenvalues"].ravel(),
        amplitudes=arrays["amplitudes"].ravel(),
        dt=float(meta["dt"]),
        rank=int(meta["rank"]),
        svd_u=arrays["svd_u"] if has_svd else None,
        svd_sigma=arrays["svd_sigma"].ravel() if has_svd else None,
        svd_w=arrays["svd_w"] if has_svd else None,
        span_residual=float(meta.get("span_residual", 0.0)),
    )
