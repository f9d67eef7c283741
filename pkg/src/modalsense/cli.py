"""Command-line interface.

Subcommands: ``generate`` (synthetic series file), ``fit`` (batch model from
a series file), ``update`` (apply snapshots to a checkpointed online state),
``place`` (placement CSV from a model file), ``scenario`` (closed loop),
``eigtrials`` (eigenvalue tracking), ``bench`` (timing table), and
``forgetting`` (forgetting-factor comparison).

Config files are JSON objects whose keys match the config dataclass; every
key is also exposed as a ``--key value`` flag that overrides the file.
Stochastic commands require ``--seed``. Metric CSVs are byte-identical
across runs with the same seed, except for wall-clock columns.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import sys

import numpy as np

from .config import ExperimentConfig, apply_overrides, load_config
from .dmd import (
    RankPolicy,
    SnapshotPair,
    continuous_eigenvalues,
    fit_dmd,
    load_model,
    save_model,
)
from .experiments import (
    eigtrial_summary,
    run_eigenvalue_trials,
    run_forgetting_comparison,
    run_timing_benchmark,
)
from .field import Workspace, gen_damped_oscillation, gen_lti_field
from .matrixio import load_snapshot_matrix, save_snapshot_matrix
from .online import (
    general_model,
    init_general,
    init_longterm,
    load_state,
    longterm_model,
    save_state,
    update_general,
    update_longterm,
    GeneralOnlineState,
)
from .placement import place_from_model, save_placement_csv
from .scenario import metrics_header, metrics_rows, run_scenario

__all__ = ["main"]


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "seed":
            continue
        parser.add_argument(f"--{f.name.replace('_', '-')}",
                            dest=f"cfg_{f.name}", default=None, metavar="V",
                            help=f"override config key {f.name}")


def _build_config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if args.config else ExperimentConfig()
    overrides = []
    for f in dataclasses.fields(ExperimentConfig):
        if f.name == "seed":
            continue
        value = getattr(args, f"cfg_{f.name}", None)
        if value is not None:
            overrides.append(f"{f.name}={value}")
    overrides.append(f"seed={args.seed}")
    return apply_overrides(cfg, overrides)


def _write_csv(path, header, rows) -> None:
    with open(path, "w", newline="", encoding="ascii") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def _parse_floats(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _cmd_generate(args) -> int:
    ws = Workspace(args.width, args.height)
    if args.generator == "damped_oscillation":
        cols = [gen_damped_oscillation(ws, t * args.dt).values
                for t in range(args.t_total)]
        data = np.column_stack(cols)
    else:
        eigs = [complex(p.replace("i", "j")) for p in args.cont_eigs.split(",")]
        series = gen_lti_field(ws, eigs, mode_seed=args.seed, T=args.t_total,
                               dt=args.dt, amplitude=args.amplitude)
        data = series.matrix()
    if args.noise_variance > 0:
        rng = np.random.default_rng(args.seed + 1)
        data = data + rng.normal(0.0, np.sqrt(args.noise_variance), data.shape)
    save_snapshot_matrix(args.out, data, args.dt)
    print(f"wrote {data.shape[0]}x{data.shape[1]} series to {args.out}")
    return 0


def _cmd_fit(args) -> int:
    matrix, dt = load_snapshot_matrix(args.input)
    if matrix.shape[1] < 2:
        raise SystemExit("series must contain at least two snapshots")
    policy = RankPolicy(fixed=args.fixed_rank or None, rel_tol=args.rank_tol)
    model = fit_dmd(SnapshotPair(matrix[:, :-1], matrix[:, 1:], dt), policy)
    save_model(args.out, model)
    omega = continuous_eigenvalues(model)[0]
    print(f"rank {model.rank}, dominant continuous eigenvalue "
          f"{omega.real:+.6f}{omega.imag:+.6f}j, span residual "
          f"{model.span_residual:.3e}; model written to {args.out}")
    return 0


def _cmd_update(args) -> int:
    matrix, dt = load_snapshot_matrix(args.input)
    if matrix.shape[1] < 2:
        raise SystemExit("series must contain at least two snapshots")
    x_new, y_new = matrix[:, :-1], matrix[:, 1:]
    if args.state:
        state = load_state(args.state)
        if isinstance(state, GeneralOnlineState):
            state = update_general(state, x_new, y_new)
            model = general_model(state)
        else:
            state = update_longterm(state, x_new, y_new)
            model = longterm_model(state)
    else:
        pair = SnapshotPair(x_new, y_new, dt)
        if args.method == "general":
            state = init_general(pair, rank_tol=args.rank_tol,
                                 max_rank=args.fixed_rank or None)
            model = general_model(state)
        else:
            state = init_longterm(pair, gamma=args.gamma)
            model = longterm_model(state)
    save_state(args.out, state)
    lam = model.eigenvalues[0]
    omega = np.log(lam) / model.dt if lam != 0 else complex("nan")
    print(f"state written to {args.out}; dominant continuous eigenvalue "
          f"{omega.real:+.6f}{omega.imag:+.6f}j")
    return 0


def _cmd_place(args) -> int:
    model = load_model(args.model)
    ws = Workspace(args.width, args.height)
    if ws.n_points != model.n_points:
        raise SystemExit(
            f"grid {args.width}x{args.height} has {ws.n_points} points; "
            f"model expects {model.n_points}"
        )
    placement = place_from_model(model, ws, args.radius, args.count)
    save_placement_csv(args.out, placement, ws)
    centers = ", ".join(str(ws.point_of(r.center_index)) for r in placement.regions)
    print(f"placed {args.count} regions at {centers}; written to {args.out}")
    return 0


def _cmd_scenario(args) -> int:
    cfg = _build_config(args)
    records = run_scenario(cfg)
    _write_csv(args.out, metrics_header(), metrics_rows(records))
    print(f"{len(records)} assimilation records written to {args.out}")
    return 0


def _cmd_eigtrials(args) -> int:
    cfg = _build_config(args)
    variances = _parse_floats(args.variances)
    results = run_eigenvalue_trials(cfg, trials=args.trials, variances=variances,
                                    workers=args.workers)
    rows = []
    for (method, variance, trial), trace in results.items():
        for t, re, im in trace:
            rows.append([method, repr(variance), str(trial), repr(t),
                         repr(re), repr(im)])
    _write_csv(args.out, ["method", "variance", "trial", "t_seconds", "re", "im"],
               rows)
    summary = eigtrial_summary(results, t_min=args.summary_after)
    for (method, variance), (med_re, iqr_re, med_im, iqr_im) in sorted(
            summary.items(), key=str):
        print(f"{method:9s} var={variance:<6g} median re {med_re:+.4f} "
              f"iqr {iqr_re:.4f} | median im {med_im:+.4f} iqr {iqr_im:.4f}")
    print(f"traces written to {args.out}")
    return 0


def _cmd_bench(args) -> int:
    rows = run_timing_benchmark(seed=args.seed)
    out_rows = [[r["environment"], str(r["t_total"]), str(r["init_t"]),
                 str(r["tau"]), r["method"], str(int(r["with_eig"])),
                 repr(r["seconds"])] for r in rows]
    _write_csv(args.out, ["environment", "t_total", "init_t", "tau", "method",
                          "with_eig", "seconds"], out_rows)
    for r in rows:
        tag = "with eig" if r["with_eig"] else "no eig  "
        print(f"{r['environment']:>7s} T={r['t_total']:<5d} tau={r['tau']:<4d} "
              f"{r['method']:9s} {tag} {r['seconds']:8.3f}s")
    print(f"timings written to {args.out}")
    return 0


def _cmd_forgetting(args) -> int:
    cfg = _build_config(args)
    rows = run_forgetting_comparison(cfg, gammas=_parse_floats(args.gammas),
                                     switch_index=args.switch_index,
                                     cont_eigs_after=args.cont_eigs_after,
                                     trials=args.trials)
    _write_csv(args.out, ["label", "trial", "error"],
               [[label, str(trial), repr(err)] for label, trial, err in rows])
    for label, trial, err in rows:
        print(f"gamma={label:6s} trial {trial}: final eigenvalue error {err:.6f}")
    print(f"results written to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="modalsense",
        description="Field modeling, sensor placement, and online adaptation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic snapshot series file")
    p.add_argument("--generator", choices=["damped_oscillation", "lti"],
                   default="damped_oscillation")
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--t-total", type=int, required=True)
    p.add_argument("--dt", type=float, required=True)
    p.add_argument("--noise-variance", type=float, default=0.0)
    p.add_argument("--cont-eigs", default="-1")
    p.add_argument("--amplitude", type=float, default=1.0)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_generate)

    p = sub.add_parser("fit", help="batch-fit a model from a series file")
    p.add_argument("--input", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--fixed-rank", type=int, default=0)
    p.add_argument("--rank-tol", type=float, default=1e-10)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("update", help="initialize or update an online state")
    p.add_argument("--input", required=True, help="series file with new snapshots")
    p.add_argument("--state", default=None, help="existing checkpoint to update")
    p.add_argument("--method", choices=["general", "longterm"], default="general")
    p.add_argument("--rank-tol", type=float, default=1e-10)
    p.add_argument("--fixed-rank", type=int, default=0)
    p.add_argument("--gamma", type=float, default=1.0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_update)

    p = sub.add_parser("place", help="emit a placement CSV from a model file")
    p.add_argument("--model", required=True)
    p.add_argument("--width", type=int, required=True)
    p.add_argument("--height", type=int, required=True)
    p.add_argument("--radius", type=int, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_place)

    p = sub.add_parser("scenario", help="run the closed-loop scenario")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True, help="metrics CSV path")
    _add_config_flags(p)
    p.set_defaults(func=_cmd_scenario)

    p = sub.add_parser("eigtrials", help="eigenvalue-tracking trials")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--variances", default="0.01,0.04,0.1")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--summary-after", type=float, default=5.0)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_eigtrials)

    p = sub.add_parser("bench", help="timing benchmark over the four environments")
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_bench)

    p = sub.add_parser("forgetting", help="forgetting-factor comparison")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--gammas", default="1.0,0.9")
    p.add_argument("--switch-index", type=int, required=True)
    p.add_argument("--cont-eigs-after", default="-2")
    p.add_argument("--trials", type=int, default=1)
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(func=_cmd_forgetting)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
