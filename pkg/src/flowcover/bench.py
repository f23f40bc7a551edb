"""Horizon-scaling benchmark harness.

Sweeps planning horizons per method, times each phase on a monotonic
clock, appends rows to CSV as they land (a killed sweep keeps its finished
rows), and fits log-log scaling exponents with confidence intervals.

Absolute times depend on the machine and are not comparison targets;
the exponents and the flow-versus-tour crossover are.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Callable, IO, Mapping

import numpy as np
import numpy.typing as npt
from scipy import stats

from .dynamics import Discretization, Trajectory, default_start, get_model
from .optimizer import PlanConfig, plan
from .reference import benchmark_mixture
from .seeding import STREAM_METRIC
from .sinkhorn import SinkhornConfig, sinkhorn_divergence
from .stein import SteinConfig
from .tsp import BaselineConfig, baseline_plan

CSV_HEADER = "method,model,horizon,rep,workers,seed,t_total_s,t_flow_s,t_lqr_s,t_rollout_s,coverage,status"
CSV_COLUMNS = tuple(CSV_HEADER.split(","))

BENCH_METHODS = ("stein", "sinkhorn", "tsp")

# Protocol constants for the canonical horizon-scaling study. Twenty fixed
# iterations with convergence checking off make every run do identical work
# per step; the kernel bandwidth is pinned so runs across horizons measure
# the same flow operator.
STUDY_HORIZONS = (100, 250, 500, 1000, 2000, 4000)
STUDY_DT = 0.05
STUDY_ITERATIONS = 20
STUDY_BANDWIDTH = 0.02
STUDY_METRIC_SAMPLES = 1000


@dataclass(frozen=True)
class BenchSpec:
    methods: tuple[str, ...] = ("stein",)
    model: str = "diff_drive"
    horizons: tuple[int, ...] = (100, 250, 500, 1000)
    reps: int = 3
    workers_sweep: tuple[int, ...] = (1,)
    seed: int = 0
    dt: float = STUDY_DT
    tsp_horizon_cap: int = 1000
    metric_samples: int = STUDY_METRIC_SAMPLES
    plan: PlanConfig | None = None
    baseline: BaselineConfig | None = None

    def __post_init__(self) -> None:
        if not self.methods:
            raise ValueError("methods must be nonempty")
        for m in self.methods:
            if m not in BENCH_METHODS:
                raise ValueError(f"unknown method {m!r}; known: {BENCH_METHODS}")
        horizons = tuple(int(h) for h in self.horizons)
        if not horizons or any(h < 1 for h in horizons):
            raise ValueError("horizons must be positive integers")
        if any(b <= a for a, b in zip(horizons, horizons[1:])):
            raise ValueError("horizons must be strictly increasing")
        object.__setattr__(self, "horizons", horizons)
        if self.reps < 1:
            raise ValueError(f"reps must be >= 1, got {self.reps}")
        workers = tuple(int(w) for w in self.workers_sweep)
        if not workers or any(w < 1 for w in workers):
            raise ValueError("workers_sweep entries must be >= 1")
        object.__setattr__(self, "workers_sweep", workers)
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.metric_samples < 1:
            raise ValueError("metric_samples must be >= 1")


@dataclass(frozen=True)
class BenchRecord:
    method: str
    model: str
    horizon: int
    rep: int
    workers: int
    seed: int
    t_total_s: float
    t_flow_s: float
    t_lqr_s: float
    t_rollout_s: float
    coverage: float
    status: str = "ok"

    def to_csv_row(self) -> str:
        return ",".join(
            [
                self.method,
                self.model,
                str(self.horizon),
                str(self.rep),
                str(self.workers),
                str(self.seed),
                repr(self.t_total_s),
                repr(self.t_flow_s),
                repr(self.t_lqr_s),
                repr(self.t_rollout_s),
                repr(self.coverage),
                self.status,
            ]
        )

    @classmethod
    def from_csv_row(cls, line: str) -> "BenchRecord":
        parts = line.rstrip("\n").split(",")
        if len(parts) != len(CSV_COLUMNS):
            raise ValueError(
                f"expected {len(CSV_COLUMNS)} fields, got {len(parts)}: {line!r}"
            )
        return cls(
            method=parts[0],
            model=parts[1],
            horizon=int(parts[2]),
            rep=int(parts[3]),
            workers=int(parts[4]),
            seed=int(parts[5]),
            t_total_s=float(parts[6]),
            t_flow_s=float(parts[7]),
            t_lqr_s=float(parts[8]),
            t_rollout_s=float(parts[9]),
            coverage=float(parts[10]),
            status=parts[11],
        )


def read_records(path: str | Path) -> list[BenchRecord]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path} does not start with the expected header")
    return [BenchRecord.from_csv_row(line) for line in lines[1:] if line.strip()]


@dataclass(frozen=True)
class PlannerRun:
    """What a planner hands back for one timed run."""

    trajectory: Trajectory
    t_flow: float
    t_lqr: float
    t_rollout: float


Planner = Callable[[int, int], PlannerRun]
MetricFn = Callable[[Trajectory], float]


def standard_planners(spec: BenchSpec) -> tuple[dict[str, Planner], MetricFn]:
    """Planner closures and the shared coverage metric for a spec.

    All methods plan against the same benchmark mixture and are scored
    against one fixed set of metric draws, so coverage columns are
    comparable across methods and horizons.
    """
    model = get_model(spec.model)
    q = benchmark_mixture(model.workspace_dim)
    s0 = default_start(model)
    plan_base = spec.plan if spec.plan is not None else PlanConfig(
        eta=0.1,
        max_iterations=STUDY_ITERATIONS,
        convergence_tol=0.0,
        stein=SteinConfig(bandwidth=STUDY_BANDWIDTH),
    )
    base_cfg = replace(plan_base, seed=spec.seed, metric_interval=0)
    tsp_base = spec.baseline if spec.baseline is not None else BaselineConfig()
    tsp_cfg = replace(tsp_base, seed=spec.seed)

    def flow_planner(method: str) -> Planner:
        def run(horizon: int, workers: int) -> PlannerRun:
            cfg = replace(base_cfg, method=method, workers=workers)
            res = plan(model, q, Discretization(spec.dt, horizon, s0), cfg)
            t = res.phase_times
            return PlannerRun(res.trajectory, t.flow, t.lqr, t.rollout)

        return run

    def run_tsp(horizon: int, workers: int) -> PlannerRun:
        res = baseline_plan(model, q, Discretization(spec.dt, horizon, s0), tsp_cfg)
        t = res.phase_times
        return PlannerRun(res.trajectory, t.flow, t.lqr, t.rollout)

    planners = {
        "stein": flow_planner("stein"),
        "sinkhorn": flow_planner("sinkhorn"),
        "tsp": run_tsp,
    }

    draws = q.sample(spec.metric_samples, [spec.seed, STREAM_METRIC])
    metric_cfg = SinkhornConfig()

    def metric(trajectory: Trajectory) -> float:
        pts = model.project_states(trajectory.S[1:])
        return sinkhorn_divergence(pts, draws, metric_cfg)

    return planners, metric


def _open_csv(path: Path) -> IO[str]:
    fresh = not path.exists() or path.stat().st_size == 0
    handle = open(path, "a")
    if fresh:
        handle.write(CSV_HEADER + "\n")
        handle.flush()
    return handle


def run_bench(
    spec: BenchSpec,
    planners: Mapping[str, Planner] | None = None,
    metric: MetricFn | None = None,
    csv_path: str | Path | None = None,
    log: Callable[[str], None] | None = None,
) -> list[BenchRecord]:
    """Run the sweep and return (and optionally stream to CSV) its records.

    One warm-up run per (method, horizon) is executed and discarded before
    timing starts; the coverage metric is evaluated after the timed phases
    so scoring never contaminates the clocks. A failing run becomes a row
    with an error tag and the sweep moves on.
    """
    if planners is None or metric is None:
        std_planners, std_metric = standard_planners(spec)
        planners = planners if planners is not None else std_planners
        metric = metric if metric is not None else std_metric
    for m in spec.methods:
        if m not in planners:
            raise ValueError(f"no planner registered for method {m!r}")

    say = log if log is not None else lambda _msg: None
    records: list[BenchRecord] = []
    handle = _open_csv(Path(csv_path)) if csv_path is not None else None

    def emit(rec: BenchRecord) -> None:
        records.append(rec)
        if handle is not None:
            handle.write(rec.to_csv_row() + "\n")
            handle.flush()

    try:
        for method in spec.methods:
            planner = planners[method]
            for horizon in spec.horizons:
                if method == "tsp" and horizon > spec.tsp_horizon_cap:
                    say(f"skip {method} at T={horizon} (cap {spec.tsp_horizon_cap})")
                    continue
                try:
                    planner(horizon, spec.workers_sweep[0])
                    say(f"warmed up {method} at T={horizon}")
                except Exception as exc:
                    say(f"warm-up failed for {method} at T={horizon}: {exc}")
                for workers in spec.workers_sweep:
                    for rep in range(spec.reps):
                        t0 = time.perf_counter()
                        try:
                            run = planner(horizon, workers)
                            t_total = time.perf_counter() - t0
                            rec = BenchRecord(
                                method=method,
                                model=spec.model,
                                horizon=horizon,
                                rep=rep,
                                workers=workers,
                                seed=spec.seed,
                                t_total_s=t_total,
                                t_flow_s=run.t_flow,
                                t_lqr_s=run.t_lqr,
                                t_rollout_s=run.t_rollout,
                                coverage=metric(run.trajectory),
                                status="ok",
                            )
                        except Exception as exc:
                            t_total = time.perf_counter() - t0
                            rec = BenchRecord(
                                method=method,
                                model=spec.model,
                                horizon=horizon,
                                rep=rep,
                                workers=workers,
                                seed=spec.seed,
                                t_total_s=t_total,
                                t_flow_s=0.0,
                                t_lqr_s=0.0,
                                t_rollout_s=0.0,
                                coverage=float("nan"),
                                status=f"error:{type(exc).__name__}",
                            )
                        emit(rec)
                        say(
                            f"{method} T={horizon} workers={workers} rep={rep}: "
                            f"{rec.t_total_s:.3f}s [{rec.status}]"
                        )
    finally:
        if handle is not None:
            handle.close()
    return records


PHASE_COLUMNS = {
    "total": "t_total_s",
    "flow": "t_flow_s",
    "lqr": "t_lqr_s",
    "rollout": "t_rollout_s",
}


def _phase_value(rec: BenchRecord, phase: str) -> float:
    try:
        return float(getattr(rec, PHASE_COLUMNS[phase]))
    except KeyError:
        raise ValueError(
            f"phase must be one of {tuple(PHASE_COLUMNS)}, got {phase!r}"
        ) from None


def median_times(
    records: list[BenchRecord], method: str, phase: str, workers: int | None = None
) -> dict[int, float]:
    """Median phase time per horizon for one method at one worker count."""
    ok = [r for r in records if r.method == method and r.status == "ok"]
    if workers is None:
        if not ok:
            return {}
        workers = min(r.workers for r in ok)
    ok = [r for r in ok if r.workers == workers]
    out: dict[int, list[float]] = {}
    for r in ok:
        out.setdefault(r.horizon, []).append(_phase_value(r, phase))
    return {h: float(np.median(v)) for h, v in sorted(out.items())}


@dataclass(frozen=True)
class ScalingFit:
    alpha: float
    ci95: float
    intercept: float
    num_horizons: int


def fit_scaling(
    records: list[BenchRecord],
    method: str,
    phase: str = "total",
    workers: int | None = None,
) -> ScalingFit:
    """Least-squares slope of log(median time) against log(horizon).

    The ci95 field is the half-width of the t-based 95% confidence
    interval on the slope; zero when the fit is exact.
    """
    med = median_times(records, method, phase, workers)
    if len(med) < 4:
        raise ValueError(
            f"need at least 4 distinct horizons for {method}/{phase}, got {len(med)}"
        )
    horizons = np.array(sorted(med), dtype=np.float64)
    times = np.array([med[int(h)] for h in horizons])
    if np.any(times <= 0):
        raise ValueError("zero or negative medians; cannot fit a log-log slope")
    x = np.log(horizons)
    y = np.log(times)
    xm = x - x.mean()
    sxx = float(xm @ xm)
    if sxx <= 0:
        raise ValueError("horizons have zero variance")
    alpha = float(xm @ y / sxx)
    intercept = float(y.mean() - alpha * x.mean())
    resid = y - (alpha * x + intercept)
    df = len(x) - 2
    sigma2 = float(resid @ resid) / df
    half = float(stats.t.ppf(0.975, df) * math.sqrt(max(sigma2, 0.0) / sxx))
    return ScalingFit(alpha=alpha, ci95=half, intercept=intercept, num_horizons=len(x))


def flow_speedup(
    records: list[BenchRecord],
    method: str,
    horizon: int | None = None,
    workers_low: int | None = None,
    workers_high: int | None = None,
) -> float:
    """Flow-phase speedup of the high worker count over the low one."""
    ok = [r for r in records if r.method == method and r.status == "ok"]
    if not ok:
        raise ValueError(f"no successful records for method {method!r}")
    if horizon is None:
        horizon = max(r.horizon for r in ok)
    counts = sorted({r.workers for r in ok if r.horizon == horizon})
    if workers_low is None:
        workers_low = counts[0] if counts else 1
    if workers_high is None:
        workers_high = counts[-1] if counts else 1
    if workers_low == workers_high:
        raise ValueError("need two distinct worker counts to compute a speedup")
    lo = median_times(records, method, "flow", workers_low).get(horizon)
    hi = median_times(records, method, "flow", workers_high).get(horizon)
    if lo is None or hi is None or hi <= 0:
        raise ValueError(f"missing flow timings at horizon {horizon}")
    return lo / hi


def write_plot(records: list[BenchRecord], path: str | Path) -> None:
    """Static log-log time-versus-horizon figure, one curve per method."""
    try:
        import matplotlib
    except ImportError as exc:
        raise RuntimeError(
            "matplotlib is required for plotting; install the 'plot' extra"
        ) from exc
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    methods = sorted({r.method for r in records if r.status == "ok"})
    for method in methods:
        med = median_times(records, method, "total")
        if not med:
            continue
        hs = sorted(med)
        ax.loglog(hs, [med[h] for h in hs], marker="o", label=method)
    ax.set_xlabel("horizon (steps)")
    ax.set_ylabel("median total time (s)")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path)
    plt.close(fig)


def horizon_scaling_study(
    csv_path: str | Path | None = None,
    methods: tuple[str, ...] = ("stein", "tsp"),
    horizons: tuple[int, ...] = STUDY_HORIZONS,
    reps: int = 3,
    workers_sweep: tuple[int, ...] = (1,),
    seed: int = 0,
    log: Callable[[str], None] | None = None,
) -> list[BenchRecord]:
    """The canonical differential-drive scaling study.

    Fixed iteration count, fixed bandwidth, convergence checking off, so
    time per horizon measures the operators and nothing else. The tour
    baseline stops at T=1000 by the default cap.
    """
    spec = BenchSpec(
        methods=methods,
        model="diff_drive",
        horizons=horizons,
        reps=reps,
        workers_sweep=workers_sweep,
        seed=seed,
    )
    return run_bench(spec, csv_path=csv_path, log=log)
