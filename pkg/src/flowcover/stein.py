"""Stein variational flow on a point set.

For points s_1..s_n and a score-based reference q, the flow at s_i is

    g(s_i) = (1/n) sum_j [ k(s_j, s_i) grad log q(s_j) + grad_{s_j} k(s_j, s_i) ]

with the RBF kernel k(s, s') = exp(-|s - s'|^2 / h). The first term pulls
points toward high density, the kernel-gradient term pushes them apart:

    grad_{s_j} k(s_j, s_i) = (2/h) (s_i - s_j) k(s_j, s_i).

Under the median heuristic h = med^2 / log(n+1), where med is the median
of all n^2 pairwise distances (self-distances included).

Every reduction that produces one output row runs inside numpy along the
contiguous last axis of a row block, so results are bit-identical for any
parallel_chunk and worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .flows import FlowField
from .parallel import resolve_workers, run_chunked
from .reference import GaussianMixture

DoubleMatrix = npt.NDArray[np.float64]

BANDWIDTH_FLOOR = 1e-12


@dataclass(frozen=True)
class SteinConfig:
    """bandwidth is "median" or a fixed squared-length value."""

    bandwidth: float | str = "median"
    parallel_chunk: int = 256
    workers: int | None = None

    def __post_init__(self) -> None:
        if isinstance(self.bandwidth, str):
            if self.bandwidth != "median":
                raise ValueError(f'bandwidth must be "median" or a number, got {self.bandwidth!r}')
        elif not self.bandwidth > 0:
            raise ValueError(f"fixed bandwidth must be positive, got {self.bandwidth}")
        if self.parallel_chunk < 1:
            raise ValueError(f"parallel_chunk must be >= 1, got {self.parallel_chunk}")
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


def _pairwise_sq(P: DoubleMatrix, Q: DoubleMatrix) -> DoubleMatrix:
    # Fixed per-coordinate accumulation order keeps the result independent
    # of how callers slice P into row blocks.
    D2 = (P[:, 0][:, None] - Q[:, 0][None, :]) ** 2
    for d in range(1, P.shape[1]):
        D2 += (P[:, d][:, None] - Q[:, d][None, :]) ** 2
    return D2


def median_bandwidth(points: DoubleMatrix) -> float:
    """h = med^2 / log(n+1); med over all n^2 pairwise distances.

    A single point has no pairwise spread, so n=1 falls back to h=1.
    """
    points = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n = points.shape[0]
    if n == 1:
        return 1.0
    med = float(np.median(np.sqrt(_pairwise_sq(points, points))))
    return med * med / math.log(n + 1.0)


def stein_flow(
    points: DoubleMatrix,
    q: GaussianMixture,
    cfg: SteinConfig = SteinConfig(),
    workers: int | None = None,
) -> FlowField:
    """Evaluate the Stein flow of q at every point.

    A degenerate bandwidth (all points coincident under the median rule) is
    clamped to BANDWIDTH_FLOOR and flagged on the returned field.
    """
    X = np.atleast_2d(np.asarray(points, dtype=np.float64))
    n, d = X.shape
    if n < 1:
        raise ValueError("need at least one point")
    if d != q.dim:
        raise ValueError(f"points have dim {d} but the reference has dim {q.dim}")

    if cfg.bandwidth == "median":
        h = median_bandwidth(X)
    else:
        h = float(cfg.bandwidth)
    clamped = h <= BANDWIDTH_FLOOR
    if clamped:
        h = BANDWIDTH_FLOOR

    scores = q.score(X)
    out = np.empty((n, d))
    inv_n = 1.0 / n
    two_over_h = 2.0 / h

    def task(a: int, b: int) -> None:
        D2 = _pairwise_sq(X[a:b], X)
        K = np.exp(-D2 / h)
        ksum = K.sum(axis=1)
        for dim in range(d):
            attract = (K * scores[:, dim][None, :]).sum(axis=1)
            weighted = (K * X[:, dim][None, :]).sum(axis=1)
            out[a:b, dim] = inv_n * (
                attract + two_over_h * (X[a:b, dim] * ksum - weighted)
            )

    run_chunked(task, n, cfg.parallel_chunk, resolve_workers(workers or cfg.workers))
    return FlowField(a=out, bandwidth=h, clamped=clamped)


def stein_flow_on_trajectory(
    S: DoubleMatrix,
    model,
    q: GaussianMixture,
    cfg: SteinConfig = SteinConfig(),
    workers: int | None = None,
) -> FlowField:
    """Stein flow on the workspace projection of S[1:].

    The initial state is a boundary condition, not a decision variable, so
    it receives no flow; the result has one vector per control step.
    """
    S = np.asarray(S, dtype=np.float64)
    if S.shape[0] < 2:
        raise ValueError("need at least two states (one control step)")
    return stein_flow(model.project_states(S[1:]), q, cfg, workers)
