"""Multi-resolution reconciliation: upsampling, stream assembly, error metrics.

Coarse-grid estimates are lifted to the fine grid with bilinear
interpolation (a convex combination, so field bounds are preserved), and a
combined stream substitutes the sparse high-fidelity reconstructions for the
upsampled estimates wherever they exist.
"""

from __future__ import annotations

import numpy as np

from .field import FieldSnapshot, SnapshotSeries, Workspace

__all__ = [
    "bilinear_upsample",
    "assemble_combined",
    "mse",
    "mean_series_mse",
]


def _axis_samples(n_from: int, n_to: int) -> np.ndarray:
    # target cells mapped onto source cell coordinates over the shared extent
    if n_to == 1:
        return np.zeros(1)
    return np.linspace(0.0, n_from - 1.0, n_to)


def bilinear_upsample(s: FieldSnapshot, from_ws: Workspace,
                      to_ws: Workspace) -> FieldSnapshot:
    """Bilinear interpolation of a coarse snapshot onto a finer grid.

    Source coordinates are clamped to the boundary cells, and identical
    source and target grids reproduce the input exactly.
    """
    if len(s) != from_ws.n_points:
        raise ValueError("snapshot does not match the source workspace")
    if to_ws.width < from_ws.width or to_ws.height < from_ws.height:
        raise ValueError("target grid must be at least as fine as the source")
    grid = s.values.reshape(from_ws.height, from_ws.width)

    u = _axis_samples(from_ws.width, to_ws.width)
    v = _axis_samples(from_ws.height, to_ws.height)
    i0 = np.clip(np.floor(u).astype(int), 0, max(from_ws.width - 2, 0))
    j0 = np.clip(np.floor(v).astype(int), 0, max(from_ws.height - 2, 0))
    i1 = np.minimum(i0 + 1, from_ws.width - 1)
    j1 = np.minimum(j0 + 1, from_ws.height - 1)
    fu = (u - i0)[None, :]
    fv = (v - j0)[:, None]

    top = grid[np.ix_(j0, i0)] * (1 - fu) + grid[np.ix_(j0, i1)] * fu
    bottom = grid[np.ix_(j1, i0)] * (1 - fu) + grid[np.ix_(j1, i1)] * fu
    out = top * (1 - fv) + bottom * fv
    return FieldSnapshot(out.ravel(), time=s.time)


def assemble_combined(av_estimates: SnapshotSeries, mv_reconstructions: dict) -> SnapshotSeries:
    """Substitute high-fidelity reconstructions into the estimate stream.

    ``mv_reconstructions`` maps series indices to snapshots on the same grid;
    at those indices the reconstruction replaces the wide-area estimate.
    The output keeps the input's uniform timeline.
    """
    n = av_estimates.n_points
    count = len(av_estimates)
    for idx, snap in mv_reconstructions.items():
        if not (0 <= idx < count):
            raise ValueError(f"reconstruction index {idx} outside the series range")
        if len(snap) != n:
            raise ValueError(
                f"grid mismatch: reconstruction at index {idx} has {len(snap)} points, "
                f"series has {n}"
            )
    snaps = []
    for idx in range(count):
        base = av_estimates[idx]
        if idx in mv_reconstructions:
            snaps.append(FieldSnapshot(mv_reconstructions[idx].values, time=base.time))
        else:
            snaps.append(base)
    return SnapshotSeries(tuple(snaps), av_estimates.dt)


def mse(est: FieldSnapshot, truth: FieldSnapshot) -> float:
    """Mean squared error over the grid: ``mean((est - truth)**2)``."""
    if len(est) != len(truth):
        raise ValueError("snapshots must share one grid")
    diff = est.values - truth.values
    return float(np.mean(diff * diff))


def mean_series_mse(estimates, truths) -> float:
    """Per-snapshot MSE averaged over a whole series."""
    estimates = list(estimates)
    truths = list(truths)
    if len(estimates) != len(truths) or not estimates:
        raise ValueError("need equal, nonempty snapshot sequences")
    return float(np.mean([mse(e, t) for e, t in zip(estimates, truths)]))
