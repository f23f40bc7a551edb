"""Flat key=value run configuration.

One `key = value` pair per line, `#` comments, strict parsing: unknown
keys are rejected with a nearest-match suggestion, and every offending
key in a file is reported in one pass rather than one at a time. Silent
typos in numeric experiment configs corrupt benchmarks; loud ones don't.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Any, Callable

import numpy as np

from .bench import BenchSpec
from .dynamics import Discretization, DynamicsModel, default_start, get_model, model_names
from .io import read_points
from .optimizer import PlanConfig
from .reference import GaussianMixture, ReferenceDistribution, SamplePoints, benchmark_mixture
from .sinkhorn import SinkhornConfig
from .stein import SteinConfig
from .tsp import BaselineConfig

METHOD_CHOICES = ("stein", "sinkhorn")
REFERENCE_KINDS = ("benchmark", "mixture", "csv")
INIT_CHOICES = ("random_small", "zeros")


class ConfigError(ValueError):
    """One or more configuration problems, aggregated."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("\n".join(self.errors))


def _parse_float(text: str) -> float:
    return float(text)


def _parse_pos_float(text: str) -> float:
    v = float(text)
    if not v > 0:
        raise ValueError(f"must be positive, got {v}")
    return v


def _parse_nonneg_float(text: str) -> float:
    v = float(text)
    if v < 0:
        raise ValueError(f"must be >= 0, got {v}")
    return v


def _parse_int(text: str) -> int:
    return int(text)


def _parse_pos_int(text: str) -> int:
    v = int(text)
    if v < 1:
        raise ValueError(f"must be >= 1, got {v}")
    return v


def _parse_nonneg_int(text: str) -> int:
    v = int(text)
    if v < 0:
        raise ValueError(f"must be >= 0, got {v}")
    return v


def _parse_floats(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("expected at least one number")
    return tuple(float(p) for p in parts)


def _parse_points(text: str) -> tuple[tuple[float, ...], ...]:
    groups = [g for g in text.split(";") if g.strip()]
    if not groups:
        raise ValueError("expected at least one point (separate points with ';')")
    pts = tuple(_parse_floats(g) for g in groups)
    if len({len(p) for p in pts}) != 1:
        raise ValueError("points must all have the same dimension")
    return pts


def _parse_pos_ints(text: str) -> tuple[int, ...]:
    parts = [p for p in text.replace(",", " ").split() if p]
    if not parts:
        raise ValueError("expected at least one integer")
    out = tuple(int(p) for p in parts)
    if any(v < 1 for v in out):
        raise ValueError("entries must be >= 1")
    return out


def _choice(options: tuple[str, ...]) -> Callable[[str], str]:
    def parse(text: str) -> str:
        if text not in options:
            raise ValueError(f"must be one of {', '.join(options)}; got {text!r}")
        return text

    return parse


def _parse_bandwidth(text: str) -> float | str:
    if text == "median":
        return "median"
    v = float(text)
    if not v > 0:
        raise ValueError(f"must be 'median' or a positive number, got {v}")
    return v


def _parse_omega(text: str) -> float | str:
    if text == "auto":
        return "auto"
    v = float(text)
    if not v > 0:
        raise ValueError(f"must be 'auto' or a positive number, got {v}")
    return v


def _parse_methods(text: str) -> tuple[str, ...]:
    parts = tuple(p for p in text.replace(",", " ").split() if p)
    if not parts:
        raise ValueError("expected at least one method")
    bad = [p for p in parts if p not in ("stein", "sinkhorn", "tsp")]
    if bad:
        raise ValueError(f"unknown methods: {', '.join(bad)}")
    return parts


def _parse_model(text: str) -> str:
    if text not in model_names():
        raise ValueError(f"must be one of {', '.join(model_names())}; got {text!r}")
    return text


def _parse_str(text: str) -> str:
    return text


@dataclass(frozen=True)
class RunConfig:
    model: str = "diff_drive"
    dt: float = 0.05
    steps: int = 400
    s0: tuple[float, ...] | None = None
    method: str = "stein"
    seed: int = 0
    eta: float = 0.1
    max_iterations: int = 300
    convergence_tol: float = 1e-4
    control_clamp: tuple[float, ...] | None = None
    metric_interval: int = 10
    metric_samples: int | None = None
    init_controls: str = "random_small"
    init_scale: float = 1e-2
    reference_kind: str = "benchmark"
    reference_means: tuple[tuple[float, ...], ...] | None = None
    reference_weights: tuple[float, ...] | None = None
    reference_variances: tuple[float, ...] | None = None
    reference_csv: str | None = None
    stein_bandwidth: float | str = "median"
    stein_parallel_chunk: int = 256
    sinkhorn_omega: float | str = "auto"
    sinkhorn_max_iters: int = 1000
    sinkhorn_tol: float = 1e-6
    sinkhorn_parallel_chunk: int = 256
    lqr_q_weight: float = 1.0
    lqr_r_weight: float = 0.1
    runtime_workers: int | None = None
    tsp_budget: int = 0
    tsp_track_iterations: int = 10
    bench_methods: tuple[str, ...] = ("stein", "tsp")
    bench_horizons: tuple[int, ...] = (100, 250, 500, 1000)
    bench_reps: int = 3
    bench_workers: tuple[int, ...] = (1,)
    bench_tsp_horizon_cap: int = 1000
    bench_metric_samples: int = 1000
    out: str | None = None


# key -> (RunConfig field, parser, documentation)
KEY_REGISTRY: dict[str, tuple[str, Callable[[str], Any], str]] = {
    "model": ("model", _parse_model, "dynamics model name"),
    "dt": ("dt", _parse_pos_float, "integration step, seconds"),
    "steps": ("steps", _parse_pos_int, "horizon length T"),
    "s0": ("s0", _parse_floats, "initial state (default: model-specific start)"),
    "method": ("method", _choice(METHOD_CHOICES), "flow method: stein or sinkhorn"),
    "seed": ("seed", _parse_nonneg_int, "master seed"),
    "eta": ("eta", _parse_pos_float, "control update step size"),
    "max_iterations": ("max_iterations", _parse_pos_int, "outer iteration budget"),
    "convergence_tol": ("convergence_tol", _parse_nonneg_float, "mean flow magnitude stop threshold (0 disables)"),
    "control_clamp": ("control_clamp", _parse_floats, "per-channel |u| bounds (optional)"),
    "metric_interval": ("metric_interval", _parse_nonneg_int, "iterations between coverage evaluations (0 disables)"),
    "metric_samples": ("metric_samples", _parse_pos_int, "reference draws for the coverage metric (default: steps)"),
    "init_controls": ("init_controls", _choice(INIT_CHOICES), "initial control sequence"),
    "init_scale": ("init_scale", _parse_pos_float, "stddev of random initial controls"),
    "reference.kind": ("reference_kind", _choice(REFERENCE_KINDS), "benchmark, mixture, or csv"),
    "reference.means": ("reference_means", _parse_points, "mixture means, points separated by ';'"),
    "reference.weights": ("reference_weights", _parse_floats, "mixture weights (default: uniform)"),
    "reference.variances": ("reference_variances", _parse_floats, "isotropic variance per component"),
    "reference.csv": ("reference_csv", _parse_str, "path to a point CSV"),
    "stein.bandwidth": ("stein_bandwidth", _parse_bandwidth, "'median' or a fixed kernel bandwidth"),
    "stein.parallel_chunk": ("stein_parallel_chunk", _parse_pos_int, "rows per parallel chunk"),
    "sinkhorn.omega": ("sinkhorn_omega", _parse_omega, "'auto' or a fixed regularization weight"),
    "sinkhorn.max_iters": ("sinkhorn_max_iters", _parse_pos_int, "scaling iteration budget"),
    "sinkhorn.tol": ("sinkhorn_tol", _parse_pos_float, "marginal violation tolerance"),
    "sinkhorn.parallel_chunk": ("sinkhorn_parallel_chunk", _parse_pos_int, "rows per parallel chunk"),
    "lqr.q_weight": ("lqr_q_weight", _parse_pos_float, "workspace tracking weight"),
    "lqr.r_weight": ("lqr_r_weight", _parse_pos_float, "control effort weight"),
    "runtime.workers": ("runtime_workers", _parse_pos_int, "worker threads (default: all cores)"),
    "tsp.budget": ("tsp_budget", _parse_nonneg_int, "max improving 2-opt moves (0 means 10n)"),
    "tsp.track_iterations": ("tsp_track_iterations", _parse_pos_int, "LQR tracking refinement rounds"),
    "bench.methods": ("bench_methods", _parse_methods, "methods to sweep"),
    "bench.horizons": ("bench_horizons", _parse_pos_ints, "horizons to sweep"),
    "bench.reps": ("bench_reps", _parse_pos_int, "timed repetitions per configuration"),
    "bench.workers": ("bench_workers", _parse_pos_ints, "worker counts to sweep"),
    "bench.tsp_horizon_cap": ("bench_tsp_horizon_cap", _parse_pos_int, "largest horizon the tour baseline runs at"),
    "bench.metric_samples": ("bench_metric_samples", _parse_pos_int, "reference draws for bench coverage"),
    "out": ("out", _parse_str, "output directory"),
}


def parse_config_text(text: str) -> dict[str, str]:
    """Split a config file into raw key/value strings; syntax errors aggregate."""
    pairs: dict[str, str] = {}
    errors: list[str] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            errors.append(f"line {lineno}: expected 'key = value', got {raw.strip()!r}")
            continue
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            errors.append(f"line {lineno}: missing key before '='")
            continue
        if key in pairs:
            errors.append(f"line {lineno}: duplicate key {key!r}")
            continue
        pairs[key] = value
    if errors:
        raise ConfigError(errors)
    return pairs


def _unknown_key_message(key: str) -> str:
    close = difflib.get_close_matches(key, KEY_REGISTRY, n=1, cutoff=0.6)
    if close:
        return f"unknown key {key!r}; did you mean {close[0]!r}?"
    return f"unknown key {key!r}"


def config_from_pairs(pairs: dict[str, str]) -> RunConfig:
    """Validate raw pairs against the registry; every problem is reported."""
    errors: list[str] = []
    values: dict[str, Any] = {}
    for key, raw in pairs.items():
        entry = KEY_REGISTRY.get(key)
        if entry is None:
            errors.append(_unknown_key_message(key))
            continue
        field_name, parser, _doc = entry
        try:
            values[field_name] = parser(raw)
        except ValueError as exc:
            errors.append(f"{key}: {exc}")
    if errors:
        raise ConfigError(errors)
    cfg = RunConfig(**values)
    errors.extend(_cross_checks(cfg))
    if errors:
        raise ConfigError(errors)
    return cfg


def _cross_checks(cfg: RunConfig) -> list[str]:
    errors: list[str] = []
    model = get_model(cfg.model)
    if cfg.s0 is not None and len(cfg.s0) != model.state_dim:
        errors.append(
            f"s0: model {cfg.model} has {model.state_dim} states, got {len(cfg.s0)} values"
        )
    if cfg.control_clamp is not None and len(cfg.control_clamp) != model.control_dim:
        errors.append(
            f"control_clamp: model {cfg.model} has {model.control_dim} controls, "
            f"got {len(cfg.control_clamp)} bounds"
        )
    if cfg.reference_kind == "mixture":
        if cfg.reference_means is None:
            errors.append("reference.means: required when reference.kind = mixture")
        else:
            dim = len(cfg.reference_means[0])
            if dim != model.workspace_dim:
                errors.append(
                    f"reference.means: workspace is {model.workspace_dim}-dimensional, "
                    f"got {dim}-dimensional points"
                )
            k = len(cfg.reference_means)
            if cfg.reference_weights is not None and len(cfg.reference_weights) != k:
                errors.append(
                    f"reference.weights: {k} components need {k} weights, "
                    f"got {len(cfg.reference_weights)}"
                )
            if cfg.reference_variances is not None and len(cfg.reference_variances) != k:
                errors.append(
                    f"reference.variances: {k} components need {k} variances, "
                    f"got {len(cfg.reference_variances)}"
                )
            if cfg.reference_variances is not None and any(
                v <= 0 for v in cfg.reference_variances
            ):
                errors.append("reference.variances: variances must be positive")
    elif cfg.reference_kind == "csv":
        if cfg.reference_csv is None:
            errors.append("reference.csv: required when reference.kind = csv")
        elif not Path(cfg.reference_csv).exists():
            errors.append(f"reference.csv: file not found: {cfg.reference_csv}")
    return errors


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError([f"config file not found: {path}"])
    return config_from_pairs(parse_config_text(path.read_text()))


def build_reference(cfg: RunConfig, model: DynamicsModel) -> ReferenceDistribution:
    if cfg.reference_kind == "benchmark":
        return benchmark_mixture(model.workspace_dim)
    if cfg.reference_kind == "mixture":
        means = np.asarray(cfg.reference_means, dtype=np.float64)
        k, dim = means.shape
        variances = cfg.reference_variances or (0.01,) * k
        covs = np.array([v * np.eye(dim) for v in variances])
        weights = (
            np.asarray(cfg.reference_weights, dtype=np.float64)
            if cfg.reference_weights is not None
            else np.full(k, 1.0 / k)
        )
        return GaussianMixture(weights=weights, means=means, covariances=covs)
    points = read_points(cfg.reference_csv)
    if points.shape[1] != model.workspace_dim:
        raise ConfigError(
            [
                f"reference.csv: workspace is {model.workspace_dim}-dimensional, "
                f"file has {points.shape[1]} columns"
            ]
        )
    return SamplePoints(points=points)


def build_discretization(cfg: RunConfig, model: DynamicsModel) -> Discretization:
    s0 = (
        np.asarray(cfg.s0, dtype=np.float64)
        if cfg.s0 is not None
        else default_start(model)
    )
    return Discretization(dt=cfg.dt, num_steps=cfg.steps, s0=s0)


def build_plan_config(cfg: RunConfig, workers: int | None = None) -> PlanConfig:
    return PlanConfig(
        method=cfg.method,
        eta=cfg.eta,
        max_iterations=cfg.max_iterations,
        convergence_tol=cfg.convergence_tol,
        control_clamp=cfg.control_clamp,
        seed=cfg.seed,
        initial_controls=cfg.init_controls,
        init_scale=cfg.init_scale,
        metric_interval=cfg.metric_interval,
        metric_samples=cfg.metric_samples,
        q_weight=cfg.lqr_q_weight,
        r_weight=cfg.lqr_r_weight,
        stein=SteinConfig(
            bandwidth=cfg.stein_bandwidth, parallel_chunk=cfg.stein_parallel_chunk
        ),
        sinkhorn=SinkhornConfig(
            omega=cfg.sinkhorn_omega,
            max_iters=cfg.sinkhorn_max_iters,
            tol=cfg.sinkhorn_tol,
            parallel_chunk=cfg.sinkhorn_parallel_chunk,
        ),
        workers=workers if workers is not None else cfg.runtime_workers,
    )


def build_baseline_config(cfg: RunConfig) -> BaselineConfig:
    return BaselineConfig(
        seed=cfg.seed,
        budget=cfg.tsp_budget,
        track_iterations=cfg.tsp_track_iterations,
        q_weight=cfg.lqr_q_weight,
        r_weight=cfg.lqr_r_weight,
    )


def build_bench_spec(cfg: RunConfig, workers: int | None = None) -> BenchSpec:
    sweep = (workers,) if workers is not None else cfg.bench_workers
    return BenchSpec(
        methods=cfg.bench_methods,
        model=cfg.model,
        horizons=cfg.bench_horizons,
        reps=cfg.bench_reps,
        workers_sweep=sweep,
        seed=cfg.seed,
        dt=cfg.dt,
        tsp_horizon_cap=cfg.bench_tsp_horizon_cap,
        metric_samples=cfg.bench_metric_samples,
        plan=replace(
            build_plan_config(cfg),
            metric_interval=0,
        ),
        baseline=build_baseline_config(cfg),
    )


def default_config_text() -> str:
    """A commented template listing every key with its default."""
    cfg = RunConfig()
    by_field = {f.name: f for f in fields(RunConfig)}
    lines = ["# flowcover run configuration", "# format: key = value, '#' starts a comment", ""]
    for key, (field_name, _parser, doc) in KEY_REGISTRY.items():
        default = by_field[field_name].default
        shown = "" if default is None else _render_value(default)
        prefix = "# " if default is None else ""
        lines.append(f"{prefix}{key} = {shown}  # {doc}")
    return "\n".join(lines) + "\n"


def _render_value(value: Any) -> str:
    if isinstance(value, tuple):
        return ", ".join(str(v) for v in value)
    return str(value)
