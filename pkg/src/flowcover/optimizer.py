"""Outer coverage-planning loop.

Each iteration rolls the controls out, evaluates a statistical flow on the
trajectory's workspace points, projects that flow onto a dynamically
feasible update with a time-varying LQR solve, and steps the controls:

    U <- clamp(U + eta * v*)

The loop stops when the mean flow magnitude falls under convergence_tol or
the iteration budget runs out. Everything downstream of the seed is
deterministic, including across worker counts.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import numpy.typing as npt

from .dynamics import (
    Discretization,
    DynamicsModel,
    RolloutDivergenceError,
    Trajectory,
    linearize_along,
    rollout,
)
from .lqr import RiccatiDivergenceError, lift_flow, solve_flow_lqr, workspace_weights
from .reference import GaussianMixture, ReferenceDistribution, SamplePoints, to_sample_based
from .seeding import STREAM_INIT_CONTROLS, STREAM_METRIC, STREAM_REFERENCE, rng_stream
from .sinkhorn import (
    FlowError,
    SinkhornConfig,
    SinkhornWarmState,
    sinkhorn_divergence,
    sinkhorn_flow,
)
from .stein import SteinConfig, stein_flow_on_trajectory

DoubleMatrix = npt.NDArray[np.float64]

METHODS = ("stein", "sinkhorn")


@dataclass(frozen=True)
class PlanConfig:
    method: str = "stein"
    eta: float = 0.1
    max_iterations: int = 300
    convergence_tol: float = 1e-4
    control_clamp: tuple[float, ...] | None = None
    seed: int = 0
    initial_controls: str | np.ndarray = "random_small"
    init_scale: float = 1e-2
    metric_interval: int = 10
    metric_samples: int | None = None
    q_weight: float = 1.0
    r_weight: float = 0.1
    stein: SteinConfig = field(default_factory=SteinConfig)
    sinkhorn: SinkhornConfig = field(default_factory=SinkhornConfig)
    workers: int | None = None

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        if not self.eta > 0:
            raise ValueError(f"eta must be positive, got {self.eta}")
        if self.max_iterations < 1:
            raise ValueError(f"max_iterations must be >= 1, got {self.max_iterations}")
        if self.convergence_tol < 0:
            raise ValueError(f"convergence_tol must be >= 0, got {self.convergence_tol}")
        if isinstance(self.initial_controls, str):
            if self.initial_controls not in ("random_small", "zeros"):
                raise ValueError(
                    'initial_controls must be "random_small", "zeros", or a control array, '
                    f"got {self.initial_controls!r}"
                )
        if not self.init_scale > 0:
            raise ValueError(f"init_scale must be positive, got {self.init_scale}")
        if self.metric_interval < 0:
            raise ValueError(f"metric_interval must be >= 0, got {self.metric_interval}")
        if self.metric_samples is not None and self.metric_samples < 1:
            raise ValueError(f"metric_samples must be >= 1, got {self.metric_samples}")
        if self.control_clamp is not None:
            clamp = tuple(float(c) for c in self.control_clamp)
            if any(c <= 0 for c in clamp):
                raise ValueError("control_clamp bounds must be positive")
            object.__setattr__(self, "control_clamp", clamp)


@dataclass(frozen=True)
class PhaseTimes:
    """Wall-clock seconds spent in each planning phase."""

    flow: float
    lqr: float
    rollout: float
    total: float


@dataclass(frozen=True)
class PlanResult:
    trajectory: Trajectory
    converged: bool
    iterations_used: int
    flow_norms: npt.NDArray[np.float64]
    lqr_costs: npt.NDArray[np.float64]
    metric_iterations: tuple[int, ...]
    metric_values: tuple[float, ...]
    phase_times: PhaseTimes
    final_metric: float | None


class PlanError(RuntimeError):
    """A planning phase failed; carries the iteration and last good trajectory."""

    def __init__(self, stage: str, iteration: int, trajectory: Trajectory | None, cause: Exception):
        self.stage = stage
        self.iteration = iteration
        self.trajectory = trajectory
        super().__init__(f"{stage} failed at iteration {iteration}: {cause}")


def coverage_metric(
    S: DoubleMatrix,
    model: DynamicsModel,
    q_samples: DoubleMatrix,
    cfg: SinkhornConfig = SinkhornConfig(),
    workers: int | None = None,
) -> float:
    """Divergence between the trajectory's workspace points and target draws.

    The initial state is excluded for the same reason it receives no flow:
    it is a boundary condition, not a coverage decision.
    """
    S = np.asarray(S, dtype=np.float64)
    return sinkhorn_divergence(model.project_states(S[1:]), q_samples, cfg, workers=workers)


def initial_controls(
    cfg: PlanConfig, model: DynamicsModel, num_steps: int
) -> DoubleMatrix:
    """Starting control sequence for a plan.

    The default is small seeded noise: zero controls leave nonholonomic
    models stationary, and a flow on coincident points cannot steer heading
    states, so a little excitation breaks that degeneracy.
    """
    shape = (num_steps, model.control_dim)
    if isinstance(cfg.initial_controls, np.ndarray):
        U0 = np.asarray(cfg.initial_controls, dtype=np.float64)
        if U0.shape != shape:
            raise ValueError(f"provided controls must have shape {shape}, got {U0.shape}")
        return U0.copy()
    if cfg.initial_controls == "zeros":
        return np.zeros(shape)
    rng = rng_stream(cfg.seed, STREAM_INIT_CONTROLS)
    return cfg.init_scale * rng.standard_normal(shape)


def metric_targets(
    q: ReferenceDistribution, cfg: PlanConfig, num_steps: int
) -> DoubleMatrix:
    """Reference draws the coverage metric scores against."""
    m = cfg.metric_samples if cfg.metric_samples is not None else num_steps
    return q.sample(m, [cfg.seed, STREAM_METRIC])


def plan(
    model: DynamicsModel,
    q: ReferenceDistribution,
    disc: Discretization,
    cfg: PlanConfig = PlanConfig(),
) -> PlanResult:
    """Synthesize a coverage trajectory for the reference distribution q."""
    if cfg.method == "stein" and not isinstance(q, GaussianMixture):
        raise ValueError("the stein method needs a score-based (mixture) reference")
    if disc.s0.shape != (model.state_dim,):
        raise ValueError(
            f"s0 must have shape ({model.state_dim},), got {disc.s0.shape}"
        )

    T = disc.num_steps
    if cfg.method == "sinkhorn":
        if isinstance(q, SamplePoints):
            targets = q
        else:
            targets = to_sample_based(q, T, [cfg.seed, STREAM_REFERENCE])
    else:
        targets = None
    warm = SinkhornWarmState()

    weights = workspace_weights(
        model.project_matrix, model.control_dim, cfg.q_weight, cfg.r_weight
    )
    want_metric = cfg.metric_interval > 0
    q_metric = metric_targets(q, cfg, T) if want_metric else None

    U = initial_controls(cfg, model, T)
    clamp = cfg.control_clamp
    if clamp is not None and len(clamp) != model.control_dim:
        raise ValueError(
            f"control_clamp needs {model.control_dim} bounds, got {len(clamp)}"
        )
    bounds = np.asarray(clamp, dtype=np.float64) if clamp is not None else None
    if bounds is not None:
        np.clip(U, -bounds, bounds, out=U)

    flow_norms: list[float] = []
    lqr_costs: list[float] = []
    metric_iters: list[int] = []
    metric_values: list[float] = []
    t_flow = t_lqr = t_rollout = 0.0
    t_begin = time.perf_counter()
    last_good: Trajectory | None = None
    converged = False
    updates = 0

    for it in range(cfg.max_iterations):
        t0 = time.perf_counter()
        try:
            S = rollout(model, disc.s0, U, disc.dt)
        except RolloutDivergenceError as exc:
            raise PlanError("rollout", it, last_good, exc) from exc
        t_rollout += time.perf_counter() - t0
        last_good = Trajectory(S=S, U=U.copy(), dt=disc.dt)

        if want_metric and it % cfg.metric_interval == 0:
            metric_iters.append(it)
            metric_values.append(
                coverage_metric(S, model, q_metric, cfg.sinkhorn, workers=cfg.workers)
            )

        t0 = time.perf_counter()
        try:
            if cfg.method == "stein":
                flow = stein_flow_on_trajectory(S, model, q, cfg.stein, workers=cfg.workers)
            else:
                flow = sinkhorn_flow(
                    model.project_states(S[1:]),
                    targets,
                    cfg.sinkhorn,
                    workers=cfg.workers,
                    warm=warm,
                )
        except FlowError as exc:
            raise PlanError("flow", it, last_good, exc) from exc
        t_flow += time.perf_counter() - t0
        flow_norms.append(flow.mean_magnitude())

        if flow_norms[-1] < cfg.convergence_tol:
            converged = True
            break

        t0 = time.perf_counter()
        try:
            sys = linearize_along(model, S, U, disc.dt)
            sol = solve_flow_lqr(sys, lift_flow(flow.a, model.project_matrix), weights)
        except RiccatiDivergenceError as exc:
            raise PlanError("lqr", it, last_good, exc) from exc
        t_lqr += time.perf_counter() - t0
        lqr_costs.append(sol.cost)

        U = U + cfg.eta * sol.v_star
        if bounds is not None:
            np.clip(U, -bounds, bounds, out=U)
        updates += 1

    t0 = time.perf_counter()
    try:
        S_final = rollout(model, disc.s0, U, disc.dt)
    except RolloutDivergenceError as exc:
        raise PlanError("rollout", updates, last_good, exc) from exc
    t_rollout += time.perf_counter() - t0
    trajectory = Trajectory(S=S_final, U=U, dt=disc.dt)

    final_metric = None
    if want_metric:
        final_metric = coverage_metric(
            S_final, model, q_metric, cfg.sinkhorn, workers=cfg.workers
        )
        final_it = updates
        if not metric_iters or metric_iters[-1] != final_it:
            metric_iters.append(final_it)
            metric_values.append(final_metric)

    return PlanResult(
        trajectory=trajectory,
        converged=converged,
        iterations_used=len(flow_norms),
        flow_norms=np.asarray(flow_norms),
        lqr_costs=np.asarray(lqr_costs),
        metric_iterations=tuple(metric_iters),
        metric_values=tuple(metric_values),
        phase_times=PhaseTimes(
            flow=t_flow,
            lqr=t_lqr,
            rollout=t_rollout,
            total=time.perf_counter() - t_begin,
        ),
        final_metric=final_metric,
    )
