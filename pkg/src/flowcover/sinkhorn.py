"""Entropic optimal transport in the log domain, its debiased divergence,
and the descent flow it induces on a point set.

For point sets X (n points) and Y (m points) with uniform marginals
a = 1/n and b = 1/m and squared-distance cost C_ij = |x_i - y_j|^2, the
entropic transport problem is

    OT_w(X, Y) = min_T  sum_ij T_ij C_ij + w * sum_ij T_ij log T_ij
                 s.t.   T 1 = a,  T' 1 = b,  T >= 0.

The optimal plan has the form T_ij = exp((f_i + g_j - C_ij) / w) for dual
potentials (f, g), and the alternating updates

    g_j = w (log b - LSE_i((f_i - C_ij) / w))
    f_i = w (log a - LSE_j((g_j - C_ij) / w))

each make one marginal exact. Everything runs on log-sum-exp reductions;
the kernel exp(-C/w) is never formed, so small w stays stable. After a
g-update from f, the row sums of T(f, g) are a_i * exp((f_i - f_new_i)/w)
with f_new the next f-update, so the marginal violation of the current
iterate costs nothing extra to monitor.

The reported cost follows the plain-entropy convention above. With both
marginals enforced it differs from the relative-entropy convention only by
a constant, which the debiasing of

    S_w(X, Y) = OT_w(X, Y) - (OT_w(X, X) + OT_w(Y, Y)) / 2

cancels exactly, so the divergence is convention-independent, nonnegative,
and zero at X == Y. Self-terms use the damped symmetric fixed point
p <- (p + update(p)) / 2 on a single potential.

The flow returned for a point set is the negative divergence gradient. At
a converged plan the envelope theorem gives

    grad_{x_i} OT_w(X, Y) = sum_j T_ij * 2 (x_i - y_j),

and the self-term contributes through both argument slots (factor 2 on the
symmetric plan), so

    grad_{x_i} S_w = 2 (r_i x_i - (T Y)_i) - 2 (rho_i x_i - (P X)_i)

with r, rho the row sums of the cross and self plans.

Row-blocked LSE sweeps keep every per-row reduction inside numpy along a
contiguous axis, so results are bit-identical for any chunk size and
worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

from .flows import FlowField
from .parallel import resolve_workers, run_chunked
from .reference import SamplePoints

DoubleVector = npt.NDArray[np.float64]
DoubleMatrix = npt.NDArray[np.float64]

AUTO_OMEGA_FACTOR = 0.05
_OMEGA_FLOOR = 1e-12
_EXP_CLIP = 500.0


class SinkhornInputError(ValueError):
    """Inputs produced a cost matrix with non-finite entries."""


class FlowError(RuntimeError):
    """Transport solution too far from its marginals to trust the gradient."""


@dataclass(frozen=True)
class SinkhornConfig:
    """omega is "auto" (scale-free: 0.05 * mean squared X-Y distance) or a number."""

    omega: float | str = "auto"
    max_iters: int = 1000
    tol: float = 1e-6
    parallel_chunk: int = 256
    workers: int | None = None

    def __post_init__(self) -> None:
        if isinstance(self.omega, str):
            if self.omega != "auto":
                raise ValueError(f'omega must be "auto" or a number, got {self.omega!r}')
        elif not self.omega > 0:
            raise ValueError(f"omega must be positive, got {self.omega}")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.parallel_chunk < 1:
            raise ValueError(f"parallel_chunk must be >= 1, got {self.parallel_chunk}")
        if self.workers is not None and self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")


class SinkhornWarmState:
    """Dual potentials carried between successive flow evaluations.

    Mutable by design: the planner owns one per run and the flow updates it
    in place. Stale sizes (the point count changed) reset silently.
    """

    __slots__ = ("f", "p")

    def __init__(self) -> None:
        self.f: DoubleVector | None = None
        self.p: DoubleVector | None = None


def _as_points(P, name: str) -> DoubleMatrix:
    P = np.atleast_2d(np.asarray(P, dtype=np.float64))
    if P.shape[0] < 1:
        raise SinkhornInputError(f"{name} must contain at least one point")
    if not np.isfinite(P).all():
        raise SinkhornInputError(f"{name} contains non-finite entries")
    return P


def _pairwise_sq(P: DoubleMatrix, Q: DoubleMatrix) -> DoubleMatrix:
    # Same fixed coordinate order as the kernel-flow module, for the same
    # reason: block slicing must not change any row's summation tree.
    D2 = (P[:, 0][:, None] - Q[:, 0][None, :]) ** 2
    for d in range(1, P.shape[1]):
        D2 += (P[:, d][:, None] - Q[:, d][None, :]) ** 2
    return D2


def resolve_omega(omega: float | str, X: DoubleMatrix, Y: DoubleMatrix) -> float:
    """Numeric omega, resolving "auto" from the mean pairwise squared distance.

    The mean is computed from per-set sufficient statistics, so it does not
    depend on any chunking of the cost matrix:
    mean_ij |x_i - y_j|^2 = mean|x|^2 + mean|y|^2 - 2 <mean x, mean y>.
    """
    if not isinstance(omega, str):
        return float(omega)
    mx = X.mean(axis=0)
    my = Y.mean(axis=0)
    mean_sq = float((X * X).sum(axis=1).mean() + (Y * Y).sum(axis=1).mean() - 2.0 * mx @ my)
    return max(AUTO_OMEGA_FACTOR * mean_sq, _OMEGA_FLOOR)


def _lse_rows(
    C: DoubleMatrix,
    pot: DoubleVector,
    omega: float,
    out: DoubleVector,
    chunk: int,
    workers: int,
) -> None:
    """out_i = LSE_j((pot_j - C_ij) / omega), row-blocked."""

    def task(a: int, b: int) -> None:
        M = (pot[None, :] - C[a:b]) / omega
        mx = M.max(axis=1)
        np.exp(M - mx[:, None], out=M)
        out[a:b] = mx + np.log(M.sum(axis=1))

    run_chunked(task, C.shape[0], chunk, workers)


def _solve_asymmetric(
    C: DoubleMatrix,
    CT: DoubleMatrix,
    omega: float,
    max_iters: int,
    tol: float,
    chunk: int,
    workers: int,
    f0: DoubleVector | None = None,
) -> tuple[DoubleVector, DoubleVector, DoubleVector, float, int, bool]:
    """Alternating dual updates; returns (f, g, row_sums, violation, iters, converged).

    The returned pair makes the column marginal exact by construction; the
    row marginal violation is the returned value, measured on exactly the
    returned potentials.
    """
    n, m = C.shape
    loga = -math.log(n)
    logb = -math.log(m)
    f = np.zeros(n) if f0 is None else f0.astype(np.float64, copy=True)
    g = np.empty(m)
    Lg = np.empty(m)
    Lf = np.empty(n)
    it = 0
    while True:
        it += 1
        _lse_rows(CT, f, omega, Lg, chunk, workers)
        g = omega * (logb - Lg)
        _lse_rows(C, g, omega, Lf, chunk, workers)
        f_new = omega * (loga - Lf)
        delta = np.clip((f - f_new) / omega, None, _EXP_CLIP)
        err = float(np.abs(np.expm1(delta)).max() / n)
        if err <= tol or it >= max_iters:
            row_sums = np.exp(delta + loga)
            return f, g, row_sums, err, it, err <= tol
        f = f_new


def _solve_symmetric(
    C: DoubleMatrix,
    omega: float,
    max_iters: int,
    tol: float,
    chunk: int,
    workers: int,
    p0: DoubleVector | None = None,
) -> tuple[DoubleVector, DoubleVector, float, int, bool]:
    """Damped fixed point for a self-transport potential.

    Returns (p, row_sums, violation, iters, converged); the plan built from
    (p, p) is symmetric, so rows and columns violate equally.
    """
    n = C.shape[0]
    loga = -math.log(n)
    p = np.zeros(n) if p0 is None else p0.astype(np.float64, copy=True)
    L = np.empty(n)
    it = 0
    while True:
        it += 1
        _lse_rows(C, p, omega, L, chunk, workers)
        target = omega * (loga - L)
        delta = np.clip((p - target) / omega, None, _EXP_CLIP)
        err = float(np.abs(np.expm1(delta)).max() / n)
        if err <= tol or it >= max_iters:
            row_sums = np.exp(delta + loga)
            return p, row_sums, err, it, err <= tol
        p = 0.5 * (p + target)


@dataclass(frozen=True)
class SinkhornSolution:
    """Converged (or budget-exhausted) dual solution of one transport problem."""

    f: DoubleVector
    g: DoubleVector
    cost: float
    iters_used: int
    converged: bool
    marginal_error: float
    omega: float
    X: DoubleMatrix
    Y: DoubleMatrix

    def plan(self) -> DoubleMatrix:
        """Materialize the (n, m) transport plan from the potentials."""
        C = _pairwise_sq(self.X, self.Y)
        return np.exp((self.f[:, None] + self.g[None, :] - C) / self.omega)


def entropic_ot(
    X,
    Y,
    cfg: SinkhornConfig = SinkhornConfig(),
    workers: int | None = None,
    omega: float | None = None,
    f0: DoubleVector | None = None,
) -> SinkhornSolution:
    """Solve entropic OT between two point sets.

    Hitting max_iters is reported through converged=False, not an error;
    the marginal_error field says how far the returned plan is from its row
    marginal (columns are exact by construction).
    """
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise SinkhornInputError(f"point dims disagree: {X.shape[1]} vs {Y.shape[1]}")
    C = _pairwise_sq(X, Y)
    if not np.isfinite(C).all():
        raise SinkhornInputError("cost matrix has non-finite entries")
    w = resolve_omega(cfg.omega, X, Y) if omega is None else float(omega)
    CT = np.ascontiguousarray(C.T)
    nworkers = resolve_workers(workers or cfg.workers)
    f, g, row_sums, err, iters, converged = _solve_asymmetric(
        C, CT, w, cfg.max_iters, cfg.tol, cfg.parallel_chunk, nworkers, f0
    )
    # cost = sum T C + w sum T log T collapses to the potentials weighted by
    # the actual plan marginals, exactly, for a plan of this form.
    m = Y.shape[0]
    cost = float(f @ row_sums + g.sum() / m)
    return SinkhornSolution(
        f=f,
        g=g,
        cost=cost,
        iters_used=iters,
        converged=converged,
        marginal_error=err,
        omega=w,
        X=X,
        Y=Y,
    )


def _self_cost(
    X: DoubleMatrix,
    omega: float,
    cfg: SinkhornConfig,
    workers: int,
    p0: DoubleVector | None = None,
) -> tuple[float, DoubleVector, DoubleVector, float, bool]:
    """Entropic self-transport cost of one point set at a fixed omega."""
    C = _pairwise_sq(X, X)
    p, row_sums, err, _, converged = _solve_symmetric(
        C, omega, cfg.max_iters, cfg.tol, cfg.parallel_chunk, workers, p0
    )
    cost = float(2.0 * (p @ row_sums))
    return cost, p, row_sums, err, converged


def sinkhorn_divergence(
    X,
    Y,
    cfg: SinkhornConfig = SinkhornConfig(),
    workers: int | None = None,
) -> float:
    """Debiased divergence S_w(X, Y); one omega is shared by all three terms."""
    X = _as_points(X, "X")
    Y = _as_points(Y, "Y")
    if X.shape[1] != Y.shape[1]:
        raise SinkhornInputError(f"point dims disagree: {X.shape[1]} vs {Y.shape[1]}")
    w = resolve_omega(cfg.omega, X, Y)
    nworkers = resolve_workers(workers or cfg.workers)
    cross = entropic_ot(X, Y, cfg, workers=nworkers, omega=w)
    self_x, _, _, _, _ = _self_cost(X, w, cfg, nworkers)
    self_y, _, _, _, _ = _self_cost(Y, w, cfg, nworkers)
    return cross.cost - 0.5 * (self_x + self_y)


def sinkhorn_flow(
    X,
    q: SamplePoints,
    cfg: SinkhornConfig = SinkhornConfig(),
    workers: int | None = None,
    warm: SinkhornWarmState | None = None,
) -> FlowField:
    """Descent direction of the divergence between X and the reference cloud.

    Returns minus the divergence gradient per point. If either transport
    solve ends with a marginal violation above 100 * tol the gradient is
    untrustworthy and a FlowError is raised; violations between tol and
    that bound are returned with converged=False.
    """
    X = _as_points(X, "X")
    Y = _as_points(q.points, "reference points")
    if X.shape[1] != Y.shape[1]:
        raise SinkhornInputError(f"point dims disagree: {X.shape[1]} vs {Y.shape[1]}")
    n, d = X.shape
    w = resolve_omega(cfg.omega, X, Y)
    nworkers = resolve_workers(workers or cfg.workers)

    C = _pairwise_sq(X, Y)
    if not np.isfinite(C).all():
        raise SinkhornInputError("cost matrix has non-finite entries")
    CT = np.ascontiguousarray(C.T)
    f0 = warm.f if warm is not None and warm.f is not None and warm.f.shape[0] == n else None
    f, g, r_cross, err_cross, _, conv_cross = _solve_asymmetric(
        C, CT, w, cfg.max_iters, cfg.tol, cfg.parallel_chunk, nworkers, f0
    )
    del CT

    Cxx = _pairwise_sq(X, X)
    p0 = warm.p if warm is not None and warm.p is not None and warm.p.shape[0] == n else None
    p, r_self, err_self, _, conv_self = _solve_symmetric(
        Cxx, w, cfg.max_iters, cfg.tol, cfg.parallel_chunk, nworkers, p0
    )

    worst = max(err_cross, err_self)
    if worst > 100.0 * cfg.tol:
        raise FlowError(
            f"transport marginals violated by {worst:.3e} (> 100 * tol = {100 * cfg.tol:.3e}); "
            "increase max_iters or omega"
        )

    # Reuse the cost buffers for the plans; C and Cxx are not needed again.
    np.exp((f[:, None] + g[None, :] - C) / w, out=C)
    np.exp((p[:, None] + p[None, :] - Cxx) / w, out=Cxx)
    flow = np.empty((n, d))
    for dim in range(d):
        ty = (C * Y[:, dim][None, :]).sum(axis=1)
        px = (Cxx * X[:, dim][None, :]).sum(axis=1)
        grad = 2.0 * (r_cross * X[:, dim] - ty) - 2.0 * (r_self * X[:, dim] - px)
        flow[:, dim] = -grad

    if warm is not None:
        warm.f = f
        warm.p = p
    return FlowField(
        a=flow,
        converged=conv_cross and conv_self,
        marginal_error=worst,
    )
