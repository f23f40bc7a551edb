"""Coverage trajectory synthesis via statistical flows and LQR matching.

A planner that steers a dynamical system so its trajectory's empirical
distribution covers a reference distribution: each iteration evaluates a
statistical gradient flow (Stein variational or entropy-regularized
transport) on the trajectory's workspace points and projects it onto a
feasible control update with a time-varying LQR solve. Includes a
waypoint-tour baseline and a horizon-scaling benchmark harness.
"""

from .bench import (
    BenchRecord,
    BenchSpec,
    ScalingFit,
    fit_scaling,
    flow_speedup,
    horizon_scaling_study,
    run_bench,
)
from .config import ConfigError, RunConfig, load_config
from .dynamics import (
    Discretization,
    DynamicsModel,
    RolloutDivergenceError,
    Trajectory,
    aircraft_3d,
    default_start,
    differential_drive,
    get_model,
    linearize_along,
    model_names,
    rollout,
    single_integrator_2d,
)
from .flows import FlowField
from .lqr import (
    LqrSolution,
    LqrWeights,
    LtvSystem,
    RiccatiDivergenceError,
    lift_flow,
    solve_flow_lqr,
    workspace_weights,
)
from .optimizer import (
    PhaseTimes,
    PlanConfig,
    PlanError,
    PlanResult,
    coverage_metric,
    plan,
)
from .reference import (
    GaussianMixture,
    ReferenceDistribution,
    SamplePoints,
    benchmark_mixture,
    to_sample_based,
)
from .sinkhorn import (
    FlowError,
    SinkhornConfig,
    SinkhornSolution,
    entropic_ot,
    sinkhorn_divergence,
    sinkhorn_flow,
)
from .stein import SteinConfig, median_bandwidth, stein_flow, stein_flow_on_trajectory
from .tsp import (
    BaselineConfig,
    BaselineResult,
    Tour,
    baseline_plan,
    build_tour,
    resample_arclength,
    track_waypoints,
)

__version__ = "0.1.0"

__all__ = [
    "BaselineConfig",
    "BaselineResult",
    "BenchRecord",
    "BenchSpec",
    "ConfigError",
    "Discretization",
    "DynamicsModel",
    "FlowError",
    "FlowField",
    "GaussianMixture",
    "LqrSolution",
    "LqrWeights",
    "LtvSystem",
    "PhaseTimes",
    "PlanConfig",
    "PlanError",
    "PlanResult",
    "ReferenceDistribution",
    "RiccatiDivergenceError",
    "RolloutDivergenceError",
    "RunConfig",
    "SamplePoints",
    "ScalingFit",
    "SinkhornConfig",
    "SinkhornSolution",
    "SteinConfig",
    "Tour",
    "Trajectory",
    "aircraft_3d",
    "baseline_plan",
    "benchmark_mixture",
    "build_tour",
    "coverage_metric",
    "default_start",
    "differential_drive",
    "entropic_ot",
    "fit_scaling",
    "flow_speedup",
    "get_model",
    "horizon_scaling_study",
    "lift_flow",
    "linearize_along",
    "load_config",
    "median_bandwidth",
    "model_names",
    "plan",
    "resample_arclength",
    "rollout",
    "run_bench",
    "single_integrator_2d",
    "sinkhorn_divergence",
    "sinkhorn_flow",
    "solve_flow_lqr",
    "stein_flow",
    "stein_flow_on_trajectory",
    "to_sample_based",
    "track_waypoints",
    "workspace_weights",
    "__version__",
]
