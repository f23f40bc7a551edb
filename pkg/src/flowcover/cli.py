"""Command-line entry point.

Subcommands: plan, baseline-tsp, bench, metric. Each is driven by a flat
config file plus a few overriding flags, writes self-describing artifacts
into an output directory, and prints one JSON object to stdout. Failures
print a JSON error object: exit 2 for config or input problems, 1 for
runtime failures.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

from .bench import fit_scaling, run_bench, write_plot
from .config import (
    ConfigError,
    RunConfig,
    build_baseline_config,
    build_bench_spec,
    build_discretization,
    build_plan_config,
    build_reference,
    load_config,
)
from .dynamics import RolloutDivergenceError, get_model
from .io import TrajectoryFormatError, read_trajectory, write_metrics, write_trajectory
from .lqr import RiccatiDivergenceError
from .optimizer import PlanError, coverage_metric, metric_targets, plan
from .parallel import ENV_WORKERS
from .reference import SamplePoints
from .seeding import STREAM_METRIC
from .sinkhorn import SinkhornConfig, sinkhorn_divergence
from .tsp import baseline_plan

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


def _emit(payload: dict[str, Any]) -> None:
    print(json.dumps(payload, sort_keys=True))


def _fail(code: int, message: str, details: list[str] | None = None) -> int:
    payload: dict[str, Any] = {"error": message}
    if details:
        payload["details"] = details
    _emit(payload)
    return code


def _load(args: argparse.Namespace) -> RunConfig:
    cfg = load_config(args.config) if args.config else RunConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    if getattr(args, "out", None) is not None:
        cfg = replace(cfg, out=args.out)
    if getattr(args, "workers", None) is not None:
        cfg = replace(cfg, runtime_workers=args.workers)
    elif os.environ.get(ENV_WORKERS):
        # The environment override outranks the config file; leaving the
        # field unset lets the worker resolver read the variable.
        cfg = replace(cfg, runtime_workers=None)
    return cfg


def _prepare_out(cfg: RunConfig, default: str, filenames: list[str], force: bool):
    out_dir = Path(cfg.out) if cfg.out else Path(default)
    existing = [str(out_dir / f) for f in filenames if (out_dir / f).exists()]
    if existing and not force:
        raise FileExistsError(
            "refusing to overwrite: " + ", ".join(existing) + " (use --force)"
        )
    out_dir.mkdir(parents=True, exist_ok=True)
    if force:
        for f in filenames:
            (out_dir / f).unlink(missing_ok=True)
    return out_dir


def _phase_dict(times) -> dict[str, float]:
    return {
        "flow": times.flow,
        "lqr": times.lqr,
        "rollout": times.rollout,
        "total": times.total,
    }


def cmd_plan(args: argparse.Namespace) -> int:
    try:
        cfg = _load(args)
        model = get_model(cfg.model)
        q = build_reference(cfg, model)
        disc = build_discretization(cfg, model)
        pcfg = build_plan_config(cfg)
        out_dir = _prepare_out(cfg, "runs/plan", ["trajectory.csv", "metrics.json"], args.force)
    except (ConfigError, FileExistsError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc), getattr(exc, "errors", None))

    try:
        res = plan(model, q, disc, pcfg)
        coverage = res.final_metric
        if coverage is None:
            coverage = coverage_metric(
                res.trajectory.S, model, metric_targets(q, pcfg, disc.num_steps),
                pcfg.sinkhorn, workers=pcfg.workers,
            )
    except (PlanError, RolloutDivergenceError, RiccatiDivergenceError, ValueError) as exc:
        return _fail(EXIT_RUNTIME, str(exc))

    write_trajectory(out_dir / "trajectory.csv", res.trajectory, model)
    write_metrics(
        out_dir / "metrics.json",
        {
            "command": "plan",
            "model": cfg.model,
            "method": pcfg.method,
            "seed": pcfg.seed,
            "coverage": coverage,
            "converged": res.converged,
            "iterations_used": res.iterations_used,
            "flow_norms": list(res.flow_norms),
            "lqr_costs": list(res.lqr_costs),
            "metric_iterations": list(res.metric_iterations),
            "metric_values": list(res.metric_values),
            "phase_times_s": _phase_dict(res.phase_times),
        },
    )
    _emit(
        {
            "coverage": coverage,
            "converged": res.converged,
            "iterations_used": res.iterations_used,
            "out": str(out_dir),
        }
    )
    return EXIT_OK


def cmd_baseline_tsp(args: argparse.Namespace) -> int:
    try:
        cfg = _load(args)
        model = get_model(cfg.model)
        q = build_reference(cfg, model)
        disc = build_discretization(cfg, model)
        bcfg = build_baseline_config(cfg)
        pcfg = build_plan_config(cfg)
        out_dir = _prepare_out(
            cfg, "runs/baseline", ["trajectory.csv", "metrics.json"], args.force
        )
    except (ConfigError, FileExistsError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc), getattr(exc, "errors", None))

    try:
        res = baseline_plan(model, q, disc, bcfg)
        coverage = coverage_metric(
            res.trajectory.S, model, metric_targets(q, pcfg, disc.num_steps),
            pcfg.sinkhorn, workers=pcfg.workers,
        )
    except (RolloutDivergenceError, RiccatiDivergenceError, ValueError) as exc:
        return _fail(EXIT_RUNTIME, str(exc))

    write_trajectory(out_dir / "trajectory.csv", res.trajectory, model)
    write_metrics(
        out_dir / "metrics.json",
        {
            "command": "baseline-tsp",
            "model": cfg.model,
            "seed": bcfg.seed,
            "coverage": coverage,
            "tour_length": res.tour.length,
            "phase_times_s": _phase_dict(res.phase_times),
        },
    )
    _emit({"coverage": coverage, "tour_length": res.tour.length, "out": str(out_dir)})
    return EXIT_OK


def cmd_bench(args: argparse.Namespace) -> int:
    try:
        cfg = _load(args)
        spec = build_bench_spec(cfg, workers=args.workers)
        filenames = ["bench.csv"] + (["time_vs_horizon.svg"] if args.plot else [])
        out_dir = _prepare_out(cfg, "runs/bench", filenames, args.force)
    except (ConfigError, FileExistsError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc), getattr(exc, "errors", None))

    csv_path = out_dir / "bench.csv"
    log = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else None
    records = run_bench(spec, csv_path=csv_path, log=log)

    fits: dict[str, float] = {}
    for method in spec.methods:
        try:
            fits[method] = fit_scaling(records, method, "total").alpha
        except ValueError:
            pass
    summary: dict[str, Any] = {
        "records": len(records),
        "failed": sum(1 for r in records if r.status != "ok"),
        "csv": str(csv_path),
        "total_alpha": fits,
    }
    if args.plot:
        try:
            write_plot(records, out_dir / "time_vs_horizon.svg")
            summary["plot"] = str(out_dir / "time_vs_horizon.svg")
        except RuntimeError as exc:
            return _fail(EXIT_CONFIG, str(exc))
    _emit(summary)
    return EXIT_OK


def cmd_metric(args: argparse.Namespace) -> int:
    try:
        cfg = _load(args)
        model = get_model(cfg.model)
        q = build_reference(cfg, model)
        trajectory = read_trajectory(args.trajectory, model)
    except (ConfigError, TrajectoryFormatError, FileNotFoundError, ValueError) as exc:
        return _fail(EXIT_CONFIG, str(exc), getattr(exc, "errors", None))

    # A CSV reference is compared against as-is; resampling someone's
    # explicit point set would silently change what is being scored.
    if isinstance(q, SamplePoints):
        targets = q.points
    else:
        m = cfg.metric_samples if cfg.metric_samples is not None else trajectory.num_steps
        targets = q.sample(m, [cfg.seed, STREAM_METRIC])
    scfg = SinkhornConfig(
        omega=cfg.sinkhorn_omega,
        max_iters=cfg.sinkhorn_max_iters,
        tol=cfg.sinkhorn_tol,
        parallel_chunk=cfg.sinkhorn_parallel_chunk,
    )
    try:
        value = sinkhorn_divergence(
            model.project_states(trajectory.S[1:]),
            targets,
            scfg,
            workers=cfg.runtime_workers,
        )
    except ValueError as exc:
        return _fail(EXIT_RUNTIME, str(exc))
    _emit({"coverage": value, "points": trajectory.num_steps})
    return EXIT_OK


def _add_common(sp: argparse.ArgumentParser, with_force: bool = True) -> None:
    sp.add_argument("--config", metavar="PATH", help="flat key=value config file")
    sp.add_argument("--out", metavar="DIR", help="output directory (overrides config)")
    sp.add_argument("--seed", type=int, metavar="N", help="master seed (overrides config)")
    sp.add_argument(
        "--workers",
        type=int,
        metavar="N",
        help=f"worker threads; otherwise {ENV_WORKERS}, then config, then all cores",
    )
    if with_force:
        sp.add_argument(
            "--force", action="store_true", help="overwrite existing output files"
        )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="flowcover",
        description="Coverage trajectory synthesis via statistical flows and LQR matching.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="synthesize a coverage trajectory")
    _add_common(p_plan)
    p_plan.set_defaults(func=cmd_plan)

    p_base = sub.add_parser("baseline-tsp", help="run the waypoint-tour baseline")
    _add_common(p_base)
    p_base.set_defaults(func=cmd_baseline_tsp)

    p_bench = sub.add_parser("bench", help="run the horizon-scaling benchmark")
    _add_common(p_bench)
    p_bench.add_argument("--plot", action="store_true", help="also write an SVG figure")
    p_bench.add_argument("--quiet", action="store_true", help="suppress progress lines")
    p_bench.set_defaults(func=cmd_bench)

    p_metric = sub.add_parser("metric", help="score a saved trajectory")
    p_metric.add_argument("trajectory", help="trajectory CSV to score")
    _add_common(p_metric, with_force=False)
    p_metric.set_defaults(func=cmd_metric)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
