"""Time-varying LQR projection of a reference flow onto feasible updates.

The planner hands this module a flow field a[0..T-1] on the trajectory and
asks for the control perturbation v that makes the induced state
perturbation z track it. z follows the Euler-discretized linearization

    z[k+1] = (I + dt*A[k]) z[k] + dt*B[k] v[k],      z[0] = 0,

and v* minimizes the discretized tracking objective

    J(v) = sum_{k=0}^{T-1} dt * ( |a[k] - z[k]|_Q^2 + |v[k]|_R^2 ).

There is no terminal cost, so the final control only steers the uncosted
z[T] and comes out exactly zero.

Writing F = I + dt*A[k], G = dt*B[k], Qb = dt*Q, Rb = dt*R, and the value
function V_k(z) = z'P_k z + 2 p_k' z + const, the backward sweep is

    H = Rb + G' P+ G
    K = H^{-1} G' P+ F            (feedback gain)
    d = -H^{-1} G' p+             (feedforward)
    P = Qb + F' P+ (F - G K)
    p = -Qb a[k] + (F - G K)' p+

with P_T = 0 and p_T = 0. The feedforward cross terms in the linear
recursion cancel exactly because K'H = F'P+G. The forward pass applies
v*[k] = -K[k] z[k] + d[k] and integrates z; the returned cost is the
objective evaluated on that pair, not a value-function prediction.

Q is built from a workspace weight: with P_w the workspace projection
matrix, Q = P_w' Q_w P_w penalizes only workspace mismatch, since the flow
carries no information about heading or speed states.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

DoubleVector = npt.NDArray[np.float64]
DoubleMatrix = npt.NDArray[np.float64]
DoubleTensor = npt.NDArray[np.float64]


class RiccatiDivergenceError(RuntimeError):
    """Backward sweep produced non-finite value matrices."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(
            f"Riccati sweep diverged at time index {step}; "
            "the linearized system is too stiff for this dt, try a smaller one"
        )


@dataclass(frozen=True)
class LtvSystem:
    """Jacobian sequences of a trajectory linearization.

    A has shape (T, n, n), B has shape (T, n, m); dt is the step length the
    Euler discretization uses.
    """

    A: DoubleTensor
    B: DoubleTensor
    dt: float

    def __post_init__(self) -> None:
        A = np.asarray(self.A, dtype=np.float64)
        B = np.asarray(self.B, dtype=np.float64)
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)
        if A.ndim != 3 or A.shape[1] != A.shape[2]:
            raise ValueError(f"A must have shape (T, n, n), got {A.shape}")
        if B.ndim != 3 or B.shape[0] != A.shape[0] or B.shape[1] != A.shape[1]:
            raise ValueError(f"B must have shape (T, n, m) matching A, got {B.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if not (np.isfinite(A).all() and np.isfinite(B).all()):
            raise ValueError("LtvSystem entries must be finite")

    @property
    def horizon(self) -> int:
        return self.A.shape[0]

    @property
    def state_dim(self) -> int:
        return self.A.shape[1]

    @property
    def control_dim(self) -> int:
        return self.B.shape[2]


@dataclass(frozen=True)
class LqrWeights:
    """Tracking weights: Q symmetric PSD on states, R symmetric PD on controls."""

    Q: DoubleMatrix
    R: DoubleMatrix

    def __post_init__(self) -> None:
        Q = np.asarray(self.Q, dtype=np.float64)
        R = np.asarray(self.R, dtype=np.float64)
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
            raise ValueError(f"Q must be square, got {Q.shape}")
        if R.ndim != 2 or R.shape[0] != R.shape[1]:
            raise ValueError(f"R must be square, got {R.shape}")
        if not np.allclose(Q, Q.T, atol=1e-12):
            raise ValueError("Q must be symmetric")
        if not np.allclose(R, R.T, atol=1e-12):
            raise ValueError("R must be symmetric")
        if np.linalg.eigvalsh(Q).min() < -1e-10:
            raise ValueError("Q must be positive semidefinite")
        try:
            np.linalg.cholesky(R)
        except np.linalg.LinAlgError as exc:
            raise ValueError("R must be positive definite") from exc


def workspace_weights(
    project_matrix: DoubleMatrix,
    control_dim: int,
    q_weight: float = 1.0,
    r_weight: float = 0.1,
) -> LqrWeights:
    """Weights penalizing workspace tracking error and control effort."""
    if not q_weight > 0:
        raise ValueError(f"q_weight must be positive, got {q_weight}")
    if not r_weight > 0:
        raise ValueError(f"r_weight must be positive, got {r_weight}")
    P = np.asarray(project_matrix, dtype=np.float64)
    return LqrWeights(Q=q_weight * (P.T @ P), R=r_weight * np.eye(control_dim))


def lift_flow(a: DoubleMatrix, project_matrix: DoubleMatrix) -> DoubleMatrix:
    """Embed a workspace flow into state space, zero on non-workspace states."""
    return np.asarray(a, dtype=np.float64) @ np.asarray(project_matrix, dtype=np.float64)


@dataclass(frozen=True)
class LqrSolution:
    v_star: DoubleMatrix  # (T, m) optimal control gradient
    z: DoubleMatrix  # (T+1, n) feasible state flow, z[0] = 0
    K: DoubleTensor  # (T, m, n) feedback gains
    d: DoubleMatrix  # (T, m) feedforward terms
    cost: float


def solve_flow_lqr(sys: LtvSystem, a: DoubleMatrix, w: LqrWeights) -> LqrSolution:
    """Solve the flow-matching LQR for a state-space flow a of shape (T, n)."""
    a = np.asarray(a, dtype=np.float64)
    T, n, m = sys.horizon, sys.state_dim, sys.control_dim
    if a.shape != (T, n):
        raise ValueError(f"flow must have shape ({T}, {n}), got {a.shape}")
    if w.Q.shape[0] != n or w.R.shape[0] != m:
        raise ValueError("weight dimensions do not match the system")

    dt = sys.dt
    Qb = dt * w.Q
    Rb = dt * w.R
    F = np.eye(n)[None, :, :] + dt * sys.A  # (T, n, n)
    G = dt * sys.B  # (T, n, m)

    K = np.empty((T, m, n))
    d = np.empty((T, m))
    P = np.zeros((n, n))
    p = np.zeros(n)
    for k in range(T - 1, -1, -1):
        Fk = F[k]
        Gk = G[k]
        PG = P @ Gk
        H = Rb + Gk.T @ PG
        # One solve for both the gain columns and the feedforward column.
        rhs = np.empty((m, n + 1))
        rhs[:, :n] = Gk.T @ (P @ Fk)
        rhs[:, n] = -(Gk.T @ p)
        sol = np.linalg.solve(H, rhs)
        K[k] = sol[:, :n]
        d[k] = sol[:, n]
        FGK = Fk - Gk @ K[k]
        P = Qb + Fk.T @ (P @ FGK)
        P = 0.5 * (P + P.T)  # keep symmetry against roundoff drift
        p = -(Qb @ a[k]) + FGK.T @ p
        if not (np.isfinite(P).all() and np.isfinite(p).all()):
            raise RiccatiDivergenceError(k)

    z = np.zeros((T + 1, n))
    v = np.empty((T, m))
    cost = 0.0
    for k in range(T):
        v[k] = d[k] - K[k] @ z[k]
        e = a[k] - z[k]
        cost += e @ (Qb @ e) + v[k] @ (Rb @ v[k])
        z[k + 1] = F[k] @ z[k] + G[k] @ v[k]
    return LqrSolution(v_star=v, z=z, K=K, d=d, cost=float(cost))
