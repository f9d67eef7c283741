"""Grid workspace, snapshot containers, and synthetic field generators.

All operations here are pure given their inputs and seeds, so they are safe
to call concurrently from multiple threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Workspace",
    "FieldSnapshot",
    "SnapshotSeries",
    "gen_damped_oscillation",
    "damped_oscillation_complex",
    "gen_lti_field",
    "gen_lti_switched",
    "inject_noise",
    "downsample",
    "downsample_indices",
]


@dataclass(frozen=True)
class Workspace:
    """Rectangular grid discretization of the field domain.

    Grid points are indexed row-major: ``index = iy * width + ix`` with
    ``ix in [0, width)`` and ``iy in [0, height)``. The physical position of
    a point is ``(ix * spacing, iy * spacing)``.
    """

    width: int
    height: int
    spacing: float = 1.0

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("workspace dimensions must be at least 1x1")
        if not (self.spacing > 0):
            raise ValueError("spacing must be positive")

    @property
    def n_points(self) -> int:
        return self.width * self.height

    def index_of(self, ix: int, iy: int) -> int:
        if not (0 <= ix < self.width and 0 <= iy < self.height):
            raise IndexError(f"cell ({ix}, {iy}) outside {self.width}x{self.height} grid")
        return iy * self.width + ix

    def point_of(self, index: int) -> tuple[int, int]:
        if not (0 <= index < self.n_points):
            raise IndexError(f"index {index} outside [0, {self.n_points})")
        iy, ix = divmod(index, self.width)
        return ix, iy

    def cell_coords(self) -> np.ndarray:
        """(N, 2) integer cell coordinates (ix, iy) in index order."""
        iy, ix = np.divmod(np.arange(self.n_points), self.width)
        return np.column_stack([ix, iy])

    def positions(self) -> np.ndarray:
        """(N, 2) physical positions of all grid points."""
        return self.cell_coords().astype(float) * self.spacing

    def bounds(self) -> tuple[float, float]:
        """Physical extent (x_max, y_max) of the grid; the origin is (0, 0)."""
        return (self.width - 1) * self.spacing, (self.height - 1) * self.spacing


@dataclass(frozen=True)
class FieldSnapshot:
    """Field values at every grid point at one instant."""

    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 1 or vals.size < 1:
            raise ValueError("snapshot values must be a nonempty 1-d sequence")
        if not np.all(np.isfinite(vals)):
            raise ValueError("snapshot values must be finite")
        if self.time < 0:
            raise ValueError("snapshot time must be nonnegative")
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.values.size


@dataclass(frozen=True)
class SnapshotSeries:
    """Time-ordered snapshots with uniform spacing ``dt``."""

    snapshots: tuple
    dt: float

    def __post_init__(self):
        snaps = tuple(self.snapshots)
        if len(snaps) < 1:
            raise ValueError("series needs at least one snapshot")
        if not (self.dt > 0):
            raise ValueError("dt must be positive")
        n = len(snaps[0])
        times = np.array([s.time for s in snaps])
        if any(len(s) != n for s in snaps):
            raise ValueError("all snapshots must share one grid")
        if len(snaps) > 1:
            gaps = np.diff(times)
            if np.any(gaps <= 0):
                raise ValueError("snapshot times must be strictly increasing")
            if np.any(np.abs(gaps - self.dt) > 1e-9 * max(self.dt, 1.0)):
                raise ValueError("snapshot spacing must be uniform and equal to dt")
        object.__setattr__(self, "snapshots", snaps)

    def __len__(self) -> int:
        return len(self.snapshots)

    def __getitem__(self, i):
        return self.snapshots[i]

    @property
    def n_points(self) -> int:
        return len(self.snapshots[0])

    def matrix(self) -> np.ndarray:
        """(N, T) array with one snapshot per column."""
        return np.column_stack([s.values for s in self.snapshots])


def _axis_coords(n: int) -> np.ndarray:
    # affine map of cell indices to [-1, 1]; a single cell sits at the center
    if n == 1:
        return np.zeros(1)
    return np.linspace(-1.0, 1.0, n)


def damped_oscillation_complex(ws: Workspace, t: float) -> np.ndarray:
    """Complex field cosh(x)*cosh(y) * (1.9j)**(-t) over the [-1, 1]^2 grid.

    The temporal factor uses the principal branch, so its magnitude decays
    as 1.9**(-t) while the phase rotates by -pi/2 per unit time.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    xs = _axis_coords(ws.width)
    ys = _axis_coords(ws.height)
    spatial = np.cosh(ys)[:, None] * np.cosh(xs)[None, :]
    return (spatial * (1.9j) ** (-t)).ravel()


def gen_damped_oscillation(ws: Workspace, t: float) -> FieldSnapshot:
    """Real part of the damped-oscillation field at time ``t`` (seconds)."""
    return FieldSnapshot(damped_oscillation_complex(ws, t).real, time=t)


def _modal_blocks(cont_eigs):
    """Group continuous eigenvalues into real rates and conjugate pairs."""
    eigs = [complex(e) for e in cont_eigs]
    used = [False] * len(eigs)
    blocks = []
    for i, e in enumerate(eigs):
        if used[i]:
            continue
        if e.imag == 0.0:
            used[i] = True
            blocks.append(("real", e.real, 0.0))
            continue
        partner = None
        for j in range(i + 1, len(eigs)):
            if not used[j] and abs(eigs[j] - e.conjugate()) <= 1e-12 * max(1.0, abs(e)):
                partner = j
                break
        if partner is None:
            raise ValueError("complex continuous eigenvalues must come in conjugate pairs")
        used[i] = used[partner] = True
        blocks.append(("pair", e.real, abs(e.imag)))
    return blocks


def _block_dim(blocks) -> int:
    return sum(1 if kind == "real" else 2 for kind, _, _ in blocks)


def _propagate(blocks, coeffs: np.ndarray, t: float) -> np.ndarray:
    """Evolve modal coefficients by t seconds under the block dynamics."""
    out = np.empty_like(coeffs)
    pos = 0
    for kind, sigma, nu in blocks:
        growth = math.exp(sigma * t)
        if kind == "real":
            out[pos] = coeffs[pos] * growth
            pos += 1
        else:
            c, s = math.cos(nu * t), math.sin(nu * t)
            a, b = coeffs[pos], coeffs[pos + 1]
            out[pos] = growth * (a * c + b * s)
            out[pos + 1] = growth * (-a * s + b * c)
            pos += 2
    return out


def _random_modes(n_points: int, q: int, mode_seed: int) -> np.ndarray:
    rng = np.random.default_rng(mode_seed)
    g = rng.standard_normal((n_points, q))
    modes, _ = np.linalg.qr(g)
    return modes


def gen_lti_field(ws, cont_eigs, mode_seed, T, dt, amplitude=1.0) -> SnapshotSeries:
    """Synthesize an exactly linear, time-invariant field.

    Random orthonormal spatial modes (seeded) evolve with the requested
    continuous-time eigenvalues; every mode starts with coefficient
    ``amplitude`` so all of them are excited. Complex eigenvalues must come
    in conjugate pairs and consume two spatial modes each, producing a real
    rotating pattern whose one-step map has the matching discrete spectrum.
    """
    if len(cont_eigs) < 1:
        raise ValueError("at least one continuous eigenvalue is required")
    if T < 2:
        raise ValueError("T must be at least 2")
    if not (dt > 0):
        raise ValueError("dt must be positive")
    blocks = _modal_blocks(cont_eigs)
    q = _block_dim(blocks)
    if q > ws.n_points:
        raise ValueError(
            f"more modes ({q}) than spatial dimensions ({ws.n_points})"
        )
    modes = _random_modes(ws.n_points, q, mode_seed)
    c0 = np.full(q, float(amplitude))
    snaps = []
    for k in range(T):
        c = _propagate(blocks, c0, k * dt)
        snaps.append(FieldSnapshot(modes @ c, time=k * dt))
    return SnapshotSeries(tuple(snaps), dt)


def gen_lti_switched(ws, eigs_before, eigs_after, switch_index, mode_seed, T, dt,
                     amplitude=1.0) -> SnapshotSeries:
    """LTI field whose spectrum switches at snapshot ``switch_index``.

    Both regimes share the same spatial modes and must have the same block
    structure (real rates and conjugate pairs in the same order); the modal
    coefficients are continuous across the switch.
    """
    blocks_a = _modal_blocks(eigs_before)
    blocks_b = _modal_blocks(eigs_after)
    if [k for k, _, _ in blocks_a] != [k for k, _, _ in blocks_b]:
        raise ValueError("regimes must share the same real/pair block structure")
    if not (0 < switch_index < T):
        raise ValueError("switch_index must fall inside the series")
    q = _block_dim(blocks_a)
    if q > ws.n_points:
        raise ValueError(f"more modes ({q}) than spatial dimensions ({ws.n_points})")
    modes = _random_modes(ws.n_points, q, mode_seed)
    c0 = np.full(q, float(amplitude))
    c_switch = _propagate(blocks_a, c0, switch_index * dt)
    snaps = []
    for k in range(T):
        if k < switch_index:
            c = _propagate(blocks_a, c0, k * dt)
        else:
            c = _propagate(blocks_b, c_switch, (k - switch_index) * dt)
        snaps.append(FieldSnapshot(modes @ c, time=k * dt))
    return SnapshotSeries(tuple(snaps), dt)


def inject_noise(s: FieldSnapshot, variance: float, seed: int) -> FieldSnapshot:
    """Add i.i.d. zero-mean Gaussian noise; deterministic for a given seed.

    The generator is PCG64 (``numpy.random.default_rng``), which produces
    identical streams across platforms.
    """
    if variance < 0:
        raise ValueError("variance must be nonnegative")
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, math.sqrt(variance), s.values.size)
    return FieldSnapshot(s.values + noise, time=s.time)


def downsample_indices(ws: Workspace, step_x: int, step_y: int) -> np.ndarray:
    """Flat indices of the coarse-grid points, in coarse index order."""
    if step_x < 1 or step_y < 1:
        raise ValueError("steps must be at least 1")
    xs = np.arange(0, ws.width, step_x)
    ys = np.arange(0, ws.height, step_y)
    return (ys[:, None] * ws.width + xs[None, :]).ravel()


def downsample(s: FieldSnapshot, ws: Workspace, step_x: int, step_y: int):
    """Keep every step-th row/column, returning the coarse snapshot and grid.

    The coarse workspace spacing is scaled by ``step_x``; anisotropic steps
    therefore keep only the x-axis physical scale.
    """
    if len(s) != ws.n_points:
        raise ValueError("snapshot does not match workspace")
    idx = downsample_indices(ws, step_x, step_y)
    coarse_w = len(range(0, ws.width, step_x))
    coarse_h = len(range(0, ws.height, step_y))
    coarse_ws = Workspace(coarse_w, coarse_h, ws.spacing * step_x)
    return FieldSnapshot(s.values[idx], time=s.time), coarse_ws
