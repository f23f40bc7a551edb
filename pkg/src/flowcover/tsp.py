"""Waypoint-tour coverage baseline.

Draw as many target points as the horizon has steps, order them with
nearest-neighbor construction plus first-improvement 2-opt, resample the
ordered path by arc length, and track it with an iterated time-varying
LQR controller. Serves as the comparison method for the flow planner.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .dynamics import DynamicsModel, Discretization, Trajectory, linearize_along, rollout
from .lqr import lift_flow, solve_flow_lqr, workspace_weights
from .optimizer import PhaseTimes
from .reference import ReferenceDistribution
from .seeding import STREAM_REFERENCE, STREAM_TOUR, rng_stream

DoubleMatrix = npt.NDArray[np.float64]

# An improving 2-opt move must beat this margin, so floating-point ties
# (such as reversing the whole open tour) never loop forever.
IMPROVEMENT_EPS = 1e-12


@dataclass(frozen=True)
class Tour:
    """Open (non-returning) visiting order over a fixed point set."""

    order: npt.NDArray[np.int64]
    length: float

    def __post_init__(self) -> None:
        order = np.asarray(self.order, dtype=np.int64)
        object.__setattr__(self, "order", order)
        if not np.array_equal(np.sort(order), np.arange(order.size)):
            raise ValueError("order must be a permutation of 0..n-1")


@dataclass(frozen=True)
class BaselineConfig:
    seed: int = 0
    budget: int = 0
    track_iterations: int = 10
    q_weight: float = 1.0
    r_weight: float = 0.1

    def __post_init__(self) -> None:
        if self.budget < 0:
            raise ValueError(f"budget must be >= 0 (0 means automatic), got {self.budget}")
        if self.track_iterations < 1:
            raise ValueError(
                f"track_iterations must be >= 1, got {self.track_iterations}"
            )


@dataclass(frozen=True)
class BaselineResult:
    trajectory: Trajectory
    tour: Tour
    waypoints: DoubleMatrix
    phase_times: PhaseTimes


def tour_length(points: DoubleMatrix, order: npt.NDArray[np.int64]) -> float:
    P = np.asarray(points, dtype=np.float64)[order]
    if len(P) < 2:
        return 0.0
    return float(np.sqrt(((P[1:] - P[:-1]) ** 2).sum(axis=1)).sum())


def _nearest_neighbor_order(points: DoubleMatrix, start: int) -> npt.NDArray[np.int64]:
    n = len(points)
    order = np.empty(n, dtype=np.int64)
    order[0] = start
    remaining = np.ones(n, dtype=bool)
    remaining[start] = False
    current = start
    for k in range(1, n):
        d2 = ((points - points[current]) ** 2).sum(axis=1)
        d2[~remaining] = np.inf
        current = int(np.argmin(d2))
        order[k] = current
        remaining[current] = False
    return order


def _first_improving_move(P: DoubleMatrix) -> tuple[int, int] | None:
    """Lexicographically first 2-opt move that shortens the open path.

    Reversing positions i..j replaces edges (i-1, i) and (j, j+1) with
    (i-1, j) and (i, j+1); missing edges at the path ends contribute zero,
    which makes the whole-path reversal a natural no-op.
    """
    n = len(P)
    for i in range(n - 1):
        tail = P[i + 1 :]
        if i > 0:
            left_new = np.sqrt(((tail - P[i - 1]) ** 2).sum(axis=1))
            left_old = float(np.sqrt(((P[i] - P[i - 1]) ** 2).sum()))
        else:
            left_new = np.zeros(len(tail))
            left_old = 0.0
        right_new = np.zeros(len(tail))
        right_old = np.zeros(len(tail))
        if len(tail) > 1:
            right_new[:-1] = np.sqrt(((P[i + 2 :] - P[i]) ** 2).sum(axis=1))
            right_old[:-1] = np.sqrt(((P[i + 2 :] - P[i + 1 : n - 1]) ** 2).sum(axis=1))
        delta = (left_new - left_old) + (right_new - right_old)
        hits = np.flatnonzero(delta < -IMPROVEMENT_EPS)
        if hits.size:
            return i, i + 1 + int(hits[0])
    return None


def build_tour(
    points: DoubleMatrix, seed: int, budget: int | None = None
) -> Tour:
    """Nearest-neighbor tour from a seeded random start, refined by 2-opt.

    Each pass rescans from the top and applies the first improving move;
    passes stop when no move improves or the budget runs out. The default
    budget of 10 n moves is far past where random instances stall.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) < 2:
        raise ValueError("need at least two points of equal dimension")
    n = len(points)
    if budget is None or budget == 0:
        budget = 10 * n
    rng = rng_stream(seed, STREAM_TOUR)
    order = _nearest_neighbor_order(points, int(rng.integers(n)))
    P = points[order]
    moves = 0
    while moves < budget:
        move = _first_improving_move(P)
        if move is None:
            break
        i, j = move
        order[i : j + 1] = order[i : j + 1][::-1]
        P = points[order]
        moves += 1
    return Tour(order=order, length=tour_length(points, order))


def resample_arclength(points: DoubleMatrix, count: int) -> DoubleMatrix:
    """Resample an ordered polyline to `count` points uniform in arc length."""
    P = np.asarray(points, dtype=np.float64)
    if P.ndim != 2 or len(P) < 1:
        raise ValueError("points must be a nonempty (n, d) array")
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    seg = np.sqrt(((P[1:] - P[:-1]) ** 2).sum(axis=1)) if len(P) > 1 else np.zeros(0)
    keep = np.concatenate(([True], seg > 0.0))
    P = P[keep]
    if len(P) == 1:
        return np.tile(P[0], (count, 1))
    cum = np.concatenate(([0.0], np.cumsum(np.sqrt(((P[1:] - P[:-1]) ** 2).sum(axis=1)))))
    targets = np.linspace(0.0, cum[-1], count)
    out = np.empty((count, P.shape[1]))
    for dim in range(P.shape[1]):
        out[:, dim] = np.interp(targets, cum, P[:, dim])
    return out


def _wrap_angle(a: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    return (a + np.pi) % (2.0 * np.pi) - np.pi


def _segment_directions(seg: DoubleMatrix) -> tuple[DoubleMatrix, npt.NDArray[np.int64]]:
    """Per-segment lengths, plus for each segment the index of the nearest
    preceding nonzero segment (-1 when none exists yet). Direction angles
    read through this index so zero-length segments inherit a heading."""
    lens = np.sqrt((seg**2).sum(axis=1))
    idx = np.where(lens > 0.0, np.arange(len(seg)), -1)
    return lens, np.maximum.accumulate(idx)


def _lift_reference(
    model: DynamicsModel, R: DoubleMatrix, dt: float
) -> tuple[DoubleMatrix, DoubleMatrix]:
    """Initial state and control guess that follow the resampled path R.

    R has T+1 points: the first becomes the start state, the remaining T
    are the tracking targets. Heading-like states come from segment
    directions, controls from their finite differences; the tracking LQR
    cleans up the rest.
    """
    T = len(R) - 1
    seg = R[1:] - R[:-1]
    lens, filled = _segment_directions(seg)
    speeds = lens / dt

    if model.name == "single_integrator_2d":
        s0 = R[0].copy()
        return s0, seg / dt

    if model.name == "diff_drive":
        psi_raw = np.arctan2(seg[:, 1], seg[:, 0])
        psi = np.where(filled >= 0, psi_raw[np.clip(filled, 0, None)], 0.0)
        U = np.zeros((T, 2))
        U[:, 0] = speeds
        U[:-1, 1] = _wrap_angle(psi[1:] - psi[:-1]) / dt
        s0 = np.array([R[0, 0], R[0, 1], psi[0]])
        return s0, U

    if model.name == "aircraft_3d":
        horiz = np.sqrt((seg[:, :2] ** 2).sum(axis=1))
        psi_raw = np.arctan2(seg[:, 1], seg[:, 0])
        gamma_raw = np.arctan2(seg[:, 2], horiz)
        fill = np.clip(filled, 0, None)
        psi = np.where(filled >= 0, psi_raw[fill], 0.0)
        gamma = np.where(filled >= 0, gamma_raw[fill], 0.0)
        U = np.zeros((T, 3))
        U[:-1, 0] = _wrap_angle(psi[1:] - psi[:-1]) / dt
        U[:-1, 1] = (gamma[1:] - gamma[:-1]) / dt
        U[:-1, 2] = (speeds[1:] - speeds[:-1]) / dt
        s0 = np.array([R[0, 0], R[0, 1], R[0, 2], psi[0], gamma[0], speeds[0]])
        return s0, U

    raise ValueError(f"no reference lift is defined for model {model.name!r}")


def track_waypoints(
    model: DynamicsModel,
    waypoints: DoubleMatrix,
    T: int,
    dt: float,
    iterations: int = 10,
    q_weight: float = 1.0,
    r_weight: float = 0.1,
    timings: dict[str, float] | None = None,
) -> tuple[DoubleMatrix, DoubleMatrix]:
    """Track an ordered waypoint path with iterated time-varying LQR.

    The path is arc-length-resampled, the start state is lifted from its
    first point, and a fixed number of linearize/solve/update rounds pulls
    the rollout onto the reference. Returns the tracked (S, U).
    """
    waypoints = np.asarray(waypoints, dtype=np.float64)
    if len(waypoints) < 2:
        raise ValueError("need at least two waypoints")
    if T < 1:
        raise ValueError(f"T must be >= 1, got {T}")
    R = resample_arclength(waypoints, T + 1)
    s0, U = _lift_reference(model, R, dt)
    ref = R[1:]
    weights = workspace_weights(model.project_matrix, model.control_dim, q_weight, r_weight)
    t_lqr = t_rollout = 0.0

    S = None
    for _ in range(iterations):
        t0 = time.perf_counter()
        S = rollout(model, s0, U, dt)
        t_rollout += time.perf_counter() - t0
        t0 = time.perf_counter()
        sys = linearize_along(model, S, U, dt)
        err = ref - model.project_states(S[1:])
        sol = solve_flow_lqr(sys, lift_flow(err, model.project_matrix), weights)
        t_lqr += time.perf_counter() - t0
        U = U + sol.v_star

    t0 = time.perf_counter()
    S = rollout(model, s0, U, dt)
    t_rollout += time.perf_counter() - t0
    if timings is not None:
        timings["lqr"] = timings.get("lqr", 0.0) + t_lqr
        timings["rollout"] = timings.get("rollout", 0.0) + t_rollout
    return S, U


def baseline_plan(
    model: DynamicsModel,
    q: ReferenceDistribution,
    disc: Discretization,
    cfg: BaselineConfig = BaselineConfig(),
) -> BaselineResult:
    """Full baseline pipeline: draw targets, order, resample, track.

    The tracked trajectory starts on the path rather than at disc.s0: the
    baseline builds its own reference, and judging it from its natural
    start keeps the comparison honest.
    """
    T = disc.num_steps
    points = q.sample(T, [cfg.seed, STREAM_REFERENCE])
    t_begin = time.perf_counter()
    t0 = time.perf_counter()
    tour = build_tour(points, cfg.seed, cfg.budget if cfg.budget else None)
    t_tour = time.perf_counter() - t0
    timings: dict[str, float] = {}
    S, U = track_waypoints(
        model,
        points[tour.order],
        T,
        disc.dt,
        iterations=cfg.track_iterations,
        q_weight=cfg.q_weight,
        r_weight=cfg.r_weight,
        timings=timings,
    )
    total = time.perf_counter() - t_begin
    return BaselineResult(
        trajectory=Trajectory(S=S, U=U, dt=disc.dt),
        tour=tour,
        waypoints=points,
        phase_times=PhaseTimes(
            flow=t_tour,
            lqr=timings.get("lqr", 0.0),
            rollout=timings.get("rollout", 0.0),
            total=total,
        ),
    )
