"""Closed-loop scenario: sense, fuse, model, place, adapt, repeat.

The loop collects wide-area estimates every step, substitutes sparse
high-fidelity reconstructions where the placed sensors measured, assimilates
the combined stream into the configured model, and re-derives the sensing
locations (greedy block pivoting) and the coverage density (temporal
spectrum) from the refreshed model. Placements take effect at the next
high-fidelity sensing step; travel time is not modeled.

Each scenario run owns its state exclusively, so independent runs may be
executed in parallel processes.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from .config import ExperimentConfig
from .coverage import (
    DensityMap,
    RobotConfiguration,
    av_sense,
    density_from_temporal,
    lloyd_iterate,
    uniform_density,
)
from .dmd import (
    RankPolicy,
    SnapshotPair,
    fit_dmd,
    reconstruct,
    reconstruct_at,
)
from .field import (
    FieldSnapshot,
    SnapshotSeries,
    Workspace,
    downsample_indices,
    gen_damped_oscillation,
    gen_lti_field,
)
from .fusion import assemble_combined, bilinear_upsample
from .matrixio import load_snapshot_matrix
from .online import (
    general_model,
    init_general,
    init_longterm,
    longterm_model,
    update_general,
    update_longterm,
)
from .placement import Placement, enumerate_candidates, place_from_model
from .recon import ObservationSet, reconstruct_full

__all__ = ["MetricsRecord", "run_scenario", "metrics_header", "metrics_rows"]

MISSING = ""


@dataclass(frozen=True)
class MetricsRecord:
    """One row per assimilation step."""

    step: int
    mse_heterogeneous: float
    mse_av_only: float
    mse_mv_only: float | None
    dominant_re: float
    dominant_im: float
    placement_ref: str
    update_seconds: float


def metrics_header() -> list[str]:
    return [
        "step",
        "mse_heterogeneous",
        "mse_av_only",
        "mse_mv_only",
        "dominant_re",
        "dominant_im",
        "placement_ref",
        "update_seconds",
    ]


def metrics_rows(records) -> list[list[str]]:
    rows = []
    for rec in records:
        rows.append([
            str(rec.step),
            repr(rec.mse_heterogeneous),
            repr(rec.mse_av_only),
            MISSING if rec.mse_mv_only is None else repr(rec.mse_mv_only),
            repr(rec.dominant_re),
            repr(rec.dominant_im),
            rec.placement_ref,
            repr(rec.update_seconds),
        ])
    return rows


def _truth_matrix(cfg: ExperimentConfig, ws_full: Workspace, seed: int) -> np.ndarray:
    if cfg.generator == "damped_oscillation":
        cols = [gen_damped_oscillation(ws_full, t * cfg.dt).values
                for t in range(cfg.t_total)]
        return np.column_stack(cols)
    if cfg.generator == "lti":
        series = gen_lti_field(ws_full, cfg.parsed_cont_eigs(), mode_seed=seed,
                               T=cfg.t_total, dt=cfg.dt, amplitude=cfg.amplitude())
        return series.matrix()
    matrix, dt = load_snapshot_matrix(cfg.series_path)
    if matrix.shape[0] != ws_full.n_points:
        raise ValueError(
            f"{cfg.series_path}: {matrix.shape[0]} grid points, expected "
            f"{ws_full.n_points}"
        )
    if matrix.shape[1] < cfg.t_total:
        raise ValueError(f"{cfg.series_path}: fewer than t_total snapshots")
    if abs(dt - cfg.dt) > 1e-9 * max(cfg.dt, 1.0):
        raise ValueError(f"{cfg.series_path}: file dt {dt} does not match config")
    return matrix[:, :cfg.t_total]


def _random_disjoint_placement(ws: Workspace, k: int, m: int, seed) -> Placement:
    """Seeded random pick of m disjoint candidate disks (uniform weights)."""
    candidates = enumerate_candidates(ws, k)
    rng = np.random.default_rng(seed)
    order = rng.permutation(len(candidates))
    chosen, taken = [], set()
    for ci in order:
        members = candidates[ci].members.tolist()
        if taken.isdisjoint(members):
            chosen.append(candidates[ci])
            taken.update(members)
            if len(chosen) == m:
                break
    if len(chosen) < m:
        raise ValueError(
            f"workspace too small for {m} disjoint radius-{k} sensing regions "
            f"(only {len(chosen)} fit)"
        )
    return Placement(tuple(chosen), tuple([1.0 / m] * m))


def _av_to_mv_indices(cfg: ExperimentConfig) -> np.ndarray:
    """Nearest mv-grid index under each av-grid point (for density transfer)."""
    ax, ay = cfg.av_steps()
    mx, my = cfg.mv_steps()
    out = np.empty(cfg.av_width * cfg.av_height, dtype=np.int64)
    pos = 0
    for iy in range(cfg.av_height):
        jy = min(int(round(iy * ay / my)), cfg.mv_height - 1)
        for ix in range(cfg.av_width):
            jx = min(int(round(ix * ax / mx)), cfg.mv_width - 1)
            out[pos] = jy * cfg.mv_width + jx
            pos += 1
    return out


def _dominant_omega(model) -> tuple[float, float]:
    lam = model.eigenvalues[0]
    if lam == 0:
        return float("nan"), float("nan")
    omega = np.log(lam) / model.dt
    return float(omega.real), float(omega.imag)


class _ModelEngine:
    """Method-dispatching wrapper holding the online state across updates."""

    def __init__(self, cfg: ExperimentConfig, stream_dt: float):
        self.cfg = cfg
        self.stream_dt = stream_dt
        self.policy = RankPolicy(fixed=cfg.rank_cap(), rel_tol=cfg.rank_tol)
        self.state = None
        self.assimilated = 0  # stream snapshots already folded in

    def assimilate(self, stream_matrix: np.ndarray):
        """Fold all pending stream snapshots in; returns the refreshed model."""
        cfg = self.cfg
        n_snaps = stream_matrix.shape[1]
        if cfg.method == "batch":
            pair = SnapshotPair(stream_matrix[:, :-1], stream_matrix[:, 1:],
                                self.stream_dt)
            model = fit_dmd(pair, self.policy)
        elif self.state is None:
            pair = SnapshotPair(stream_matrix[:, :-1], stream_matrix[:, 1:],
                                self.stream_dt)
            if cfg.method == "general":
                self.state = init_general(pair, rank_tol=cfg.rank_tol,
                                          max_rank=cfg.rank_cap())
                model = general_model(self.state)
            else:
                self.state = init_longterm(pair, gamma=cfg.gamma)
                model = longterm_model(self.state)
        else:
            x_new = stream_matrix[:, self.assimilated - 1:n_snaps - 1]
            y_new = stream_matrix[:, self.assimilated:n_snaps]
            if cfg.method == "general":
                if cfg.general_time_stride > 1:
                    x_new = x_new[:, ::cfg.general_time_stride]
                    y_new = y_new[:, ::cfg.general_time_stride]
                self.state = update_general(self.state, x_new, y_new)
                model = general_model(self.state)
            else:
                self.state = update_longterm(self.state, x_new, y_new)
                model = longterm_model(self.state)
        self.assimilated = n_snaps
        return model

    def anchor_index(self, stream_index: int) -> int:
        # batch models anchor amplitudes at the first snapshot, online models
        # at the most recent one
        return 0 if self.cfg.method == "batch" else stream_index


def run_scenario(cfg: ExperimentConfig):
    """Execute the closed loop; one metrics record per assimilation step."""
    ws_full = cfg.full_workspace()
    av_sx, av_sy = cfg.av_steps()
    mv_sx, mv_sy = cfg.mv_steps()
    ws_av = Workspace(cfg.av_width, cfg.av_height, cfg.spacing * av_sx)
    ws_mv = Workspace(cfg.mv_width, cfg.mv_height, cfg.spacing * mv_sx)

    root = np.random.SeedSequence(cfg.seed)
    seed_truth, seed_av, seed_mv, seed_place, seed_robots = root.spawn(5)
    truth = _truth_matrix(cfg, ws_full, seed=seed_truth.generate_state(1)[0])
    av_idx = downsample_indices(ws_full, av_sx, av_sy)
    mv_idx = downsample_indices(ws_full, mv_sx, mv_sy)
    truth_av = truth[av_idx, :]
    truth_mv = truth[mv_idx, :]

    n_stream_steps = (cfg.t_total + cfg.av_time_step - 1) // cfg.av_time_step
    av_seeds = seed_av.generate_state(n_stream_steps, dtype=np.uint64)
    rng_mv = np.random.default_rng(seed_mv)

    placement = _random_disjoint_placement(
        ws_mv, cfg.sensing_radius, cfg.mv_count,
        seed_place.generate_state(1)[0],
    )
    av_cfg = RobotConfiguration.random(
        ws_av, cfg.av_count, seed_robots.generate_state(1)[0]
    )
    av_cfg = lloyd_iterate(ws_av, av_cfg, uniform_density(ws_av),
                           cfg.lloyd_max_iters, cfg.lloyd_tol)
    av_to_mv = _av_to_mv_indices(cfg)

    stream_dt = cfg.dt * cfg.av_time_step
    engine = _ModelEngine(cfg, stream_dt)
    model = None
    stream_av: list[FieldSnapshot] = []
    mv_recons: dict[int, FieldSnapshot] = {}
    mv_recon_steps: list[int] = []
    noise_std = float(np.sqrt(cfg.noise_variance))
    records: list[MetricsRecord] = []

    for step in range(cfg.t_total):
        if step % cfg.av_time_step:
            continue
        k = step // cfg.av_time_step

        av_snap = av_sense(
            FieldSnapshot(truth_av[:, step], time=step * cfg.dt),
            ws_av, av_cfg, cfg.sigma0, cfg.beta, int(av_seeds[k]),
        )
        stream_av.append(bilinear_upsample(av_snap, ws_av, ws_mv))

        if model is not None and step % cfg.mv_time_step == 0:
            obs = placement.observation_set()
            x_l = truth_mv[obs.indices, step] + rng_mv.normal(
                0.0, noise_std, obs.n_obs
            )
            mv_recons[k] = reconstruct_full(model, obs, x_l, time=step * cfg.dt)
            mv_recon_steps.append(step)

        if step < cfg.init_t or (step - cfg.init_t) % cfg.update_every:
            continue

        combined = assemble_combined(
            SnapshotSeries(tuple(stream_av), stream_dt), mv_recons
        )
        stream_matrix = combined.matrix()
        started = time.perf_counter()
        model = engine.assimilate(stream_matrix)
        update_seconds = time.perf_counter() - started

        het = reconstruct(model, k - engine.anchor_index(k)).values
        truth_now = truth_mv[:, step]
        mse_het = float(np.mean((het - truth_now) ** 2))
        mse_av = float(np.mean((stream_av[k].values - truth_now) ** 2))
        mse_mv = _mv_only_mse(cfg, engine.policy, mv_recons, mv_recon_steps,
                              step, truth_now)
        dom_re, dom_im = _dominant_omega(model)
        placement_ref = "|".join(str(r.center_index) for r in placement.regions)
        records.append(MetricsRecord(
            step=step,
            mse_heterogeneous=mse_het,
            mse_av_only=mse_av,
            mse_mv_only=mse_mv,
            dominant_re=dom_re,
            dominant_im=dom_im,
            placement_ref=placement_ref,
            update_seconds=update_seconds,
        ))

        if not cfg.mv_random_placement:
            placement = place_from_model(model, ws_mv, cfg.sensing_radius,
                                         cfg.mv_count)
        density = density_from_temporal(model)
        av_density = DensityMap.normalized(density.weights[av_to_mv] + 1e-12)
        av_cfg = lloyd_iterate(ws_av, av_cfg, av_density,
                               cfg.lloyd_max_iters, cfg.lloyd_tol)

    return records


def _mv_only_mse(cfg, policy, mv_recons, mv_recon_steps, step, truth_now):
    """DMD prediction built from the high-fidelity reconstructions alone."""
    if len(mv_recon_steps) < 2:
        return None
    matrix = np.column_stack([
        mv_recons[s // cfg.av_time_step].values for s in mv_recon_steps
    ])
    dt_mv = cfg.dt * cfg.mv_time_step
    pair = SnapshotPair(matrix[:, :-1], matrix[:, 1:], dt_mv)
    try:
        mv_model = fit_dmd(pair, policy)
    except (ValueError, np.linalg.LinAlgError):
        return None
    est = reconstruct_at(mv_model, (step - mv_recon_steps[0]) * cfg.dt)
    return float(np.mean((est - truth_now) ** 2))
