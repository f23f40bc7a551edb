"""Dynamical systems: vector fields, Jacobians, rollout, linearization.

Each model is a bundle of pure callables plus a linear projection from the
full state onto the workspace where coverage is measured. Rollout uses one
RK4 step per control interval with zero-order-hold controls.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import numpy.typing as npt

from .lqr import LtvSystem

DoubleVector = npt.NDArray[np.float64]
DoubleMatrix = npt.NDArray[np.float64]

VectorField = Callable[[DoubleVector, DoubleVector], DoubleVector]
JacobianFn = Callable[[DoubleVector, DoubleVector], DoubleMatrix]


class RolloutDivergenceError(RuntimeError):
    """Integration produced a non-finite state."""

    def __init__(self, step: int):
        self.step = step
        super().__init__(f"state became non-finite at rollout step {step}")


@dataclass(frozen=True)
class DynamicsModel:
    name: str
    state_dim: int
    control_dim: int
    workspace_dim: int
    state_names: tuple[str, ...]
    control_names: tuple[str, ...]
    f: VectorField
    jacobian_A: JacobianFn
    jacobian_B: JacobianFn
    project_matrix: DoubleMatrix

    def __post_init__(self) -> None:
        if self.state_dim < 1 or self.control_dim < 1:
            raise ValueError("state_dim and control_dim must be positive")
        if not 1 <= self.workspace_dim <= self.state_dim:
            raise ValueError("workspace_dim must be in [1, state_dim]")
        if len(self.state_names) != self.state_dim:
            raise ValueError("state_names length must equal state_dim")
        if len(self.control_names) != self.control_dim:
            raise ValueError("control_names length must equal control_dim")
        P = np.asarray(self.project_matrix, dtype=np.float64)
        object.__setattr__(self, "project_matrix", P)
        if P.shape != (self.workspace_dim, self.state_dim):
            raise ValueError(
                f"project_matrix must have shape "
                f"({self.workspace_dim}, {self.state_dim}), got {P.shape}"
            )

    def project(self, s: DoubleVector) -> DoubleVector:
        """Workspace point of one state."""
        return self.project_matrix @ np.asarray(s, dtype=np.float64)

    def project_states(self, S: DoubleMatrix) -> DoubleMatrix:
        """Workspace points of a stack of states, shape (k, workspace_dim)."""
        return np.asarray(S, dtype=np.float64) @ self.project_matrix.T


def single_integrator_2d() -> DynamicsModel:
    """Massless 2D point: f(s, u) = u, workspace equals state."""

    def f(s: DoubleVector, u: DoubleVector) -> DoubleVector:
        return np.asarray(u, dtype=np.float64)

    def jac_A(s: DoubleVector, u: DoubleVector) -> DoubleMatrix:
        return np.zeros((2, 2))

    def jac_B(s: DoubleVector, u: DoubleVector) -> DoubleMatrix:
        return np.eye(2)

    return DynamicsModel(
        name="single_integrator_2d",
        state_dim=2,
        control_dim=2,
        workspace_dim=2,
        state_names=("x", "y"),
        control_names=("vx", "vy"),
        f=f,
        jacobian_A=jac_A,
        jacobian_B=jac_B,
        project_matrix=np.eye(2),
    )


def differential_drive() -> DynamicsModel:
    """Unicycle: state (x, y, theta), control (v, omega)."""

    def f(s: DoubleVector, u: DoubleVector) -> DoubleVector:
        return np.array([u[0] * np.cos(s[2]), u[0] * np.sin(s[2]), u[1]])

    def jac_A(s: DoubleVector, u: DoubleVector) -> DoubleMatrix:
        st, ct = np.sin(s[2]), np.cos(s[2])
        return np.array(
            [
                [0.0, 0.0, -u[0] * st],
                [0.0, 0.0, u[0] * ct],
                [0.0, 0.0, 0.0],
            ]
        )

    def jac_B(s: DoubleVector, u: DoubleVector) -> DoubleMatrix:
        st, ct = np.sin(s[2]), np.cos(s[2])
        return np.array([[ct, 0.0], [st, 0.0], [0.0, 1.0]])

    return DynamicsModel(
        name="diff_drive",
        state_dim=3,
        control_dim=2,
        workspace_dim=2,
        state_names=("x", "y", "theta"),
        control_names=("v", "omega"),
        f=f,
        jacobian_A=jac_A,
        jacobian_B=jac_B,
        project_matrix=np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]),
    )


def aircraft_3d() -> DynamicsModel:
    """Kinematic fixed-wing: state (x, y, z, psi, gamma, v).

    psi is heading, gamma the flight-path angle, v airspeed; the controls
    command their rates (psi_dot, gamma_dot, v_dot) directly.
    """
    B = np.zeros((6, 3))
    B[3, 0] = 1.0
    B[4, 1] = 1.0
    B[5, 2] = 1.0

    def f(s: DoubleVector, u: DoubleVector) -> DoubleVector:
        psi, gamma, v = s[3], s[4], s[5]
        cg = np.cos(gamma)
        return np.array(
            [v * cg * np.cos(psi), v * cg * np.sin(psi), v * np.sin(gamma), u[0], u[1], u[2]]
        )

    def jac_A(s: DoubleVector, u: DoubleVector) -> DoubleMatrix:
        psi, gamma, v = s[3], s[4], s[5]
        sp, cp = np.sin(psi), np.cos(psi)
        sg, cg = np.sin(gamma), np.cos(gamma)
        A = np.zeros((6, 6))
        A[0, 3] = -v * cg * sp
        A[0, 4] = -v * sg * cp
        A[0, 5] = cg * cp
        A[1, 3] = v * cg * cp
        A[1, 4] = -v * sg * sp
        A[1, 5] = cg * sp
        A[2, 4] = v * cg
        A[2, 5] = sg
        return A

    def jac_B(s: DoubleVector, u: DoubleVector) -> DoubleMatrix:
        return B.copy()

    P = np.zeros((3, 6))
    P[0, 0] = P[1, 1] = P[2, 2] = 1.0
    return DynamicsModel(
        name="aircraft_3d",
        state_dim=6,
        control_dim=3,
        workspace_dim=3,
        state_names=("x", "y", "z", "psi", "gamma", "v"),
        control_names=("psi_dot", "gamma_dot", "accel"),
        f=f,
        jacobian_A=jac_A,
        jacobian_B=jac_B,
        project_matrix=P,
    )


_MODEL_FACTORIES = {
    "single_integrator_2d": single_integrator_2d,
    "diff_drive": differential_drive,
    "aircraft_3d": aircraft_3d,
}


def model_names() -> tuple[str, ...]:
    return tuple(sorted(_MODEL_FACTORIES))


def get_model(name: str) -> DynamicsModel:
    try:
        factory = _MODEL_FACTORIES[name]
    except KeyError:
        known = ", ".join(model_names())
        raise ValueError(f"unknown model {name!r}; known models: {known}") from None
    return factory()


_DEFAULT_STARTS = {
    "single_integrator_2d": (0.1, 0.1),
    "diff_drive": (0.1, 0.1, 0.0),
    "aircraft_3d": (0.1, 0.1, 0.35, 0.0, 0.0, 0.2),
}


def default_start(model: DynamicsModel) -> DoubleVector:
    """A start state inside the unit-box workspace the fixtures live in.

    The aircraft starts with a small positive airspeed: at v = 0 its heading
    and climb channels have no authority and the first linearization is
    uninformative.
    """
    try:
        return np.array(_DEFAULT_STARTS[model.name], dtype=np.float64)
    except KeyError:
        return np.zeros(model.state_dim)


@dataclass(frozen=True)
class Discretization:
    """Time grid and initial state for one planning problem."""

    dt: float
    num_steps: int
    s0: DoubleVector

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")
        if self.num_steps < 1:
            raise ValueError(f"num_steps must be >= 1, got {self.num_steps}")
        s0 = np.asarray(self.s0, dtype=np.float64)
        if s0.ndim != 1:
            raise ValueError("s0 must be a vector")
        if not np.isfinite(s0).all():
            raise ValueError("s0 must be finite")
        object.__setattr__(self, "s0", s0)

    @property
    def horizon(self) -> float:
        return self.dt * self.num_steps


@dataclass(frozen=True)
class Trajectory:
    """A rolled-out trajectory: S has T+1 states, U has T controls."""

    S: DoubleMatrix
    U: DoubleMatrix
    dt: float

    def __post_init__(self) -> None:
        S = np.asarray(self.S, dtype=np.float64)
        U = np.asarray(self.U, dtype=np.float64)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "U", U)
        if S.ndim != 2 or U.ndim != 2 or S.shape[0] != U.shape[0] + 1:
            raise ValueError(f"expected S: (T+1, n) and U: (T, m), got {S.shape}, {U.shape}")
        if not self.dt > 0:
            raise ValueError(f"dt must be positive, got {self.dt}")

    @property
    def num_steps(self) -> int:
        return self.U.shape[0]

    @property
    def times(self) -> DoubleVector:
        return self.dt * np.arange(self.S.shape[0], dtype=np.float64)


def rollout(model: DynamicsModel, s0: DoubleVector, U: DoubleMatrix, dt: float) -> DoubleMatrix:
    """Integrate the model with RK4 and zero-order-hold controls.

    Returns S of shape (T+1, state_dim) with S[0] = s0. Raises
    RolloutDivergenceError naming the step where the state left the finite
    range.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    U = np.asarray(U, dtype=np.float64)
    if U.ndim != 2 or U.shape[0] < 1 or U.shape[1] != model.control_dim:
        raise ValueError(f"U must have shape (T, {model.control_dim}) with T >= 1, got {U.shape}")
    s0 = np.asarray(s0, dtype=np.float64)
    if s0.shape != (model.state_dim,):
        raise ValueError(f"s0 must have shape ({model.state_dim},), got {s0.shape}")

    T = U.shape[0]
    f = model.f
    S = np.empty((T + 1, model.state_dim))
    S[0] = s0
    s = s0
    half = 0.5 * dt
    sixth = dt / 6.0
    # Overflow here is an expected failure mode that becomes a typed error,
    # so the intermediate arithmetic should not also emit runtime warnings.
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(T):
            u = U[k]
            k1 = f(s, u)
            k2 = f(s + half * k1, u)
            k3 = f(s + half * k2, u)
            k4 = f(s + dt * k3, u)
            s = s + sixth * (k1 + 2.0 * (k2 + k3) + k4)
            if not np.isfinite(s).all():
                raise RolloutDivergenceError(k + 1)
            S[k + 1] = s
    return S


def linearize_along(
    model: DynamicsModel, S: DoubleMatrix, U: DoubleMatrix, dt: float
) -> LtvSystem:
    """Jacobian sequences A[k], B[k] evaluated at (S[k], U[k]) for k < T."""
    S = np.asarray(S, dtype=np.float64)
    U = np.asarray(U, dtype=np.float64)
    if S.shape[0] != U.shape[0] + 1:
        raise ValueError(f"need |S| == |U| + 1, got {S.shape[0]} and {U.shape[0]}")
    T = U.shape[0]
    A = np.empty((T, model.state_dim, model.state_dim))
    B = np.empty((T, model.state_dim, model.control_dim))
    for k in range(T):
        A[k] = model.jacobian_A(S[k], U[k])
        B[k] = model.jacobian_B(S[k], U[k])
    return LtvSystem(A=A, B=B, dt=dt)
