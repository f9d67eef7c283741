"""Coverage control for wide-area sensors: density, Voronoi cells, Lloyd steps.

The density over the grid is built from the model's temporal spectrum so
that regions of strong growth or decay attract coverage; robots then descend
the standard quadratic coverage cost by moving to the density-weighted
centroids of their Voronoi cells. A distance-degraded sensing model turns
robot positions into noisy wide-area measurements.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dmd import DmdModel
from .field import FieldSnapshot, Workspace

__all__ = [
    "DensityMap",
    "RobotConfiguration",
    "uniform_density",
    "density_from_temporal",
    "voronoi_partition",
    "lloyd_step",
    "lloyd_iterate",
    "coverage_cost",
    "av_sense",
]

_DENSITY_FLOOR = 1e-12


@dataclass(frozen=True)
class DensityMap:
    """Nonnegative per-point weights normalized to sum to one."""

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 1 or w.size < 1:
            raise ValueError("density must be a nonempty 1-d sequence")
        if np.any(w < 0):
            raise ValueError("density weights must be nonnegative")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError("density weights must sum to 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def normalized(cls, raw) -> "DensityMap":
        raw = np.asarray(raw, dtype=float)
        total = raw.sum()
        if total <= 0:
            raise ValueError("cannot normalize an all-zero density")
        return cls(raw / total)


def uniform_density(ws: Workspace) -> DensityMap:
    return DensityMap(np.full(ws.n_points, 1.0 / ws.n_points))


@dataclass(frozen=True)
class RobotConfiguration:
    """Continuous planar positions of the wide-area robots."""

    positions: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2 or pos.shape[0] < 1:
            raise ValueError("positions must be an (m, 2) array")
        object.__setattr__(self, "positions", pos)

    @property
    def count(self) -> int:
        return self.positions.shape[0]

    def validate_in(self, ws: Workspace) -> None:
        xb, yb = ws.bounds()
        pos = self.positions
        if (np.any(pos[:, 0] < 0) or np.any(pos[:, 0] > xb)
                or np.any(pos[:, 1] < 0) or np.any(pos[:, 1] > yb)):
            raise ValueError("robot positions must lie inside the workspace rectangle")

    @classmethod
    def random(cls, ws: Workspace, count: int, seed: int) -> "RobotConfiguration":
        rng = np.random.default_rng(seed)
        xb, yb = ws.bounds()
        pos = rng.uniform(0.0, 1.0, size=(count, 2)) * np.array([xb, yb])
        return cls(pos)


def density_from_temporal(m: DmdModel, exponent: float = 1.0) -> DensityMap:
    """Per-point density ``sum_i |mode_pi| * |log|lambda_i||^exponent``.

    Emphasizes locations whose dominant content grows or decays fastest.
    When every eigenvalue sits on the unit circle there is no growth or decay
    to chase, and the density falls back to uniform. A 1e-12 floor keeps the
    normalization defined when the weighted magnitudes vanish somewhere.
    """
    if m.modes.shape[1] < 1:
        raise ValueError("model has no modes")
    mags = np.abs(m.eigenvalues)
    if np.all(np.abs(mags - 1.0) < 1e-12):
        return DensityMap(np.full(m.n_points, 1.0 / m.n_points))
    rates = np.abs(np.log(np.maximum(mags, 1e-300)))
    raw = np.abs(m.modes) @ rates**exponent
    return DensityMap.normalized(raw + _DENSITY_FLOOR)


def voronoi_partition(ws: Workspace, cfg: RobotConfiguration) -> np.ndarray:
    """Index of the nearest robot for every grid point; ties go to the lowest."""
    cfg.validate_in(ws)
    pts = ws.positions()
    d2 = np.sum((pts[:, None, :] - cfg.positions[None, :, :]) ** 2, axis=2)
    return np.argmin(d2, axis=1)


def lloyd_step(ws: Workspace, cfg: RobotConfiguration,
               density: DensityMap) -> RobotConfiguration:
    """Move each robot to the density-weighted centroid of its Voronoi cell.

    A robot whose cell carries no mass stays put.
    """
    if density.weights.size != ws.n_points:
        raise ValueError("density does not match the workspace")
    owners = voronoi_partition(ws, cfg)
    pts = ws.positions()
    new_pos = cfg.positions.copy()
    for j in range(cfg.count):
        cell = owners == j
        mass = density.weights[cell].sum()
        if mass <= 0:
            continue
        new_pos[j] = (density.weights[cell][:, None] * pts[cell]).sum(axis=0) / mass
    return RobotConfiguration(new_pos)


def lloyd_iterate(ws: Workspace, cfg: RobotConfiguration, density: DensityMap,
                  max_iters: int = 100, tol: float = 1e-6) -> RobotConfiguration:
    """Iterate Lloyd steps until robots move less than ``tol`` grid units."""
    current = cfg
    for _ in range(max_iters):
        nxt = lloyd_step(ws, current, density)
        moved = np.linalg.norm(nxt.positions - current.positions, axis=1).max()
        current = nxt
        if moved < tol:
            break
    return current


def coverage_cost(ws: Workspace, cfg: RobotConfiguration,
                  density: DensityMap) -> float:
    """Density-weighted squared distance from each point to its robot."""
    if density.weights.size != ws.n_points:
        raise ValueError("density does not match the workspace")
    owners = voronoi_partition(ws, cfg)
    pts = ws.positions()
    d2 = np.sum((pts - cfg.positions[owners]) ** 2, axis=1)
    return float((d2 * density.weights).sum())


def av_sense(truth: FieldSnapshot, ws: Workspace, cfg: RobotConfiguration,
             sigma0: float, beta: float, seed: int) -> FieldSnapshot:
    """Wide-area measurement with distance-degraded noise.

    Each grid point is read by its Voronoi owner with Gaussian noise of
    standard deviation ``sigma0 * (1 + beta * d)`` where ``d`` is the
    distance to the owning robot. Deterministic given the seed.
    """
    if sigma0 < 0 or beta < 0:
        raise ValueError("sigma0 and beta must be nonnegative")
    if len(truth) != ws.n_points:
        raise ValueError("truth snapshot does not match the workspace")
    owners = voronoi_partition(ws, cfg)
    pts = ws.positions()
    dist = np.linalg.norm(pts - cfg.positions[owners], axis=1)
    scale = sigma0 * (1.0 + beta * dist)
    rng = np.random.default_rng(seed)
    noisy = truth.values + rng.standard_normal(ws.n_points) * scale
    return FieldSnapshot(noisy, time=truth.time)
