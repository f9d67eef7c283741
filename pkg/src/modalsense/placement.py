"""Radius-constrained selection of informative sensing regions.

Candidate regions are disks of grid points. The greedy selector repeatedly
takes the candidate whose columns carry the most 2-norm mass in the working
matrix, records an informativeness weight, removes every candidate that
overlaps the pick, and deflates the selected block's span out of all
remaining columns. A pointwise variant and an exhaustive oracle are provided
for cross-checking.

Candidate scoring within one iteration is independent per candidate;
iterations are inherently sequential.
"""

from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass

import numpy as np

from .dmd import DmdModel
from .field import Workspace
from .recon import ObservationSet, placement_objective

__all__ = [
    "SensingRegion",
    "Placement",
    "enumerate_candidates",
    "pivoted_qr_points",
    "block_pivoted_qr",
    "place_from_model",
    "brute_force_placement",
    "save_placement_csv",
]


@dataclass(frozen=True)
class SensingRegion:
    """Grid points within Euclidean distance ``radius`` cells of the center."""

    center_index: int
    radius: int
    members: np.ndarray

    def __post_init__(self):
        members = np.asarray(self.members, dtype=np.int64)
        if members.ndim != 1 or members.size < 1:
            raise ValueError("region must contain at least its center")
        if np.any(np.diff(members) <= 0):
            raise ValueError("members must be sorted and unique")
        if self.center_index not in members:
            raise ValueError("center must belong to the region")
        if self.radius < 0:
            raise ValueError("radius must be nonnegative")
        object.__setattr__(self, "members", members)


@dataclass(frozen=True)
class Placement:
    """Disjoint sensing regions with informativeness weights in (0, 1]."""

    regions: tuple
    weights: tuple

    def __post_init__(self):
        regions = tuple(self.regions)
        weights = tuple(float(w) for w in self.weights)
        if len(regions) != len(weights) or not regions:
            raise ValueError("need one weight per region and at least one region")
        seen = set()
        for reg in regions:
            overlap = seen.intersection(reg.members.tolist())
            if overlap:
                raise ValueError(f"regions overlap at grid indices {sorted(overlap)}")
            seen.update(reg.members.tolist())
        for w in weights:
            if not (0 < w <= 1):
                raise ValueError(f"weights must lie in (0, 1], got {w}")
        object.__setattr__(self, "regions", regions)
        object.__setattr__(self, "weights", weights)

    def all_indices(self) -> np.ndarray:
        return np.sort(np.concatenate([r.members for r in self.regions]))

    def observation_set(self) -> ObservationSet:
        return ObservationSet(self.all_indices())


def enumerate_candidates(ws: Workspace, k: int) -> list:
    """One candidate disk per grid point, clipped at the workspace boundary."""
    if k < 0:
        raise ValueError("radius must be nonnegative")
    coords = ws.cell_coords()
    regions = []
    for center in range(ws.n_points):
        d2 = np.sum((coords - coords[center]) ** 2, axis=1)
        members = np.flatnonzero(d2 <= k * k)
        regions.append(SensingRegion(center, k, members))
    return regions


def _orthonormal_basis(block: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the block's column space, dropping null directions."""
    u, s, _ = np.linalg.svd(block, full_matrices=False)
    if s.size == 0 or s[0] <= 0:
        return u[:, :0]
    return u[:, s > 1e-12 * s[0]]


def pivoted_qr_points(M, m: int) -> np.ndarray:
    """Greedy column pivoting for point measurements.

    Picks the column of maximal 2-norm (lowest index on ties), deflates its
    orthogonal projection out of every column, and repeats ``m`` times.
    """
    work = np.array(M, dtype=complex if np.iscomplexobj(M) else float)
    if work.ndim != 2 or work.shape[0] != work.shape[1]:
        raise ValueError("expected a square matrix")
    if not (1 <= m <= work.shape[1]):
        raise ValueError(f"cannot pick {m} columns from {work.shape[1]}")
    picked = []
    available = np.ones(work.shape[1], dtype=bool)
    for _ in range(m):
        norms = np.linalg.norm(work, axis=0)
        norms[~available] = -1.0
        pivot = int(np.argmax(norms))  # argmax keeps the lowest index on ties
        picked.append(pivot)
        available[pivot] = False
        basis = _orthonormal_basis(work[:, pivot:pivot + 1])
        if basis.shape[1]:
            work -= basis @ (basis.conj().T @ work)
    return np.asarray(picked, dtype=np.int64)


def _greedy_block_select(matrix: np.ndarray, candidates, m: int):
    """Shared greedy loop over candidate regions on the columns of ``matrix``."""
    work = np.array(matrix, dtype=complex if np.iscomplexobj(matrix) else float)
    alive = np.ones(len(candidates), dtype=bool)
    member_lists = [c.members for c in candidates]
    chosen, weights = [], []
    for round_idx in range(m):
        norms = np.linalg.norm(work, axis=0)
        best, best_score = -1, -1.0
        for ci in range(len(candidates)):
            if not alive[ci]:
                continue
            score = float(norms[member_lists[ci]].sum())
            if score > best_score:
                best, best_score = ci, score
        if best < 0:
            raise ValueError(
                f"only {round_idx} of {m} disjoint placements were feasible"
            )
        total = float(norms.sum())
        block = work[:, member_lists[best]]
        block_norm = float(np.linalg.norm(block, 2))
        if total <= 0 or block_norm <= 0:
            raise ValueError(
                f"column mass exhausted: only {round_idx} of {m} placements "
                "carry information"
            )
        chosen.append(candidates[best])
        weights.append(block_norm / total)
        taken = set(member_lists[best].tolist())
        for ci in range(len(candidates)):
            if alive[ci] and not taken.isdisjoint(member_lists[ci].tolist()):
                alive[ci] = False
        basis = _orthonormal_basis(block)
        if basis.shape[1]:
            work -= basis @ (basis.conj().T @ work)
    return chosen, weights


def block_pivoted_qr(gram, ws: Workspace, k: int, m: int) -> Placement:
    """Greedy block pivoting on the mode Gram matrix.

    Each round selects the candidate disk maximizing the summed column
    2-norms of the current (deflated) matrix and records the weight
    ``||selected block||_2 / sum of all column norms`` evaluated at selection
    time, before that pick's deflation.
    """
    gram = np.asarray(gram)
    if gram.ndim != 2 or gram.shape[0] != gram.shape[1]:
        raise ValueError("gram must be square")
    if gram.shape[0] != ws.n_points:
        raise ValueError("gram size does not match the workspace")
    if m < 1:
        raise ValueError("m must be at least 1")
    candidates = enumerate_candidates(ws, k)
    regions, weights = _greedy_block_select(gram, candidates, m)
    return Placement(tuple(regions), tuple(weights))


def _coefficient_matrix(model: DmdModel) -> np.ndarray:
    """(r, N) factor whose columns reproduce the mode Gram columns isometrically."""
    q, r_fac = np.linalg.qr(model.modes)
    return r_fac @ model.modes.conj().T


def place_from_model(model: DmdModel, ws: Workspace, k: int, m: int) -> Placement:
    """Same greedy selection as :func:`block_pivoted_qr` without forming the
    N x N Gram matrix; selections and weights are identical."""
    if model.n_points != ws.n_points:
        raise ValueError("model grid does not match the workspace")
    if m < 1:
        raise ValueError("m must be at least 1")
    candidates = enumerate_candidates(ws, k)
    regions, weights = _greedy_block_select(_coefficient_matrix(model), candidates, m)
    return Placement(tuple(regions), tuple(weights))


def brute_force_placement(model: DmdModel, ws: Workspace, k: int, m: int) -> Placement:
    """Exhaustive maximization of the log-det objective over disjoint tuples.

    Guarded to small instances; intended as a test oracle only. Weights are
    computed on the undeflated matrix since exhaustive search has no
    selection order.
    """
    if m > 3:
        raise ValueError("exhaustive search is guarded to m <= 3")
    if ws.n_points > 100:
        raise ValueError("exhaustive search is guarded to grids of <= 100 points")
    if model.n_points != ws.n_points:
        raise ValueError("model grid does not match the workspace")
    candidates = enumerate_candidates(ws, k)
    best_combo, best_value = None, float("-inf")
    for combo in itertools.combinations(range(len(candidates)), m):
        members = [candidates[ci].members for ci in combo]
        union = np.concatenate(members)
        if np.unique(union).size != union.size:
            continue
        obs = ObservationSet(np.sort(union))
        value = placement_objective(model, obs)
        if value > best_value:
            best_combo, best_value = combo, value
    if best_combo is None:
        raise ValueError(f"no {m} disjoint regions exist on this workspace")
    coeff = _coefficient_matrix(model)
    norms = np.linalg.norm(coeff, axis=0)
    total = float(norms.sum())
    regions = tuple(candidates[ci] for ci in best_combo)
    weights = tuple(
        float(np.linalg.norm(coeff[:, reg.members], 2)) / total for reg in regions
    )
    return Placement(regions, weights)


def save_placement_csv(path, placement: Placement, ws: Workspace) -> None:
    """One row per region: center coordinates, radius, weight, member count."""
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(["center_x", "center_y", "radius", "weight", "member_count"])
        for reg, w in zip(placement.regions, placement.weights):
            cx, cy = ws.point_of(reg.center_index)
            writer.writerow([cx, cy, reg.radius, repr(w), reg.members.size])
