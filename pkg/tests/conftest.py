"""Shared fixtures.

The expensive piece is the energy-distance oracle: a 50000-draw standard
normal reference cloud whose self-term is computed once per session with a
chunked |a|^2 + |b|^2 - 2ab expansion (the naive all-pairs norm would need
20 GB). The particle-descent experiment is also session-scoped because two
test files assert different things about the same run.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from flowcover import GaussianMixture, SteinConfig, stein_flow

settings.register_profile(
    "flowcover",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("flowcover")


def mean_pairwise_norm(A: np.ndarray, B: np.ndarray, chunk: int = 1024) -> float:
    """Mean Euclidean distance over all pairs (A_i, B_j), diagonal included."""
    a2 = np.einsum("ij,ij->i", A, A)
    b2 = np.einsum("ij,ij->i", B, B)
    total = 0.0
    for start in range(0, A.shape[0], chunk):
        block = A[start : start + chunk]
        sq = a2[start : start + chunk, None] + b2[None, :] - 2.0 * (block @ B.T)
        np.maximum(sq, 0.0, out=sq)
        total += float(np.sqrt(sq).sum())
    return total / (A.shape[0] * B.shape[0])


@dataclass(frozen=True)
class EnergyOracle:
    """Energy distance to a fixed standard-normal reference cloud."""

    draws: np.ndarray
    self_term: float

    def __call__(self, X: np.ndarray) -> float:
        cross = mean_pairwise_norm(X, self.draws)
        within = mean_pairwise_norm(X, X)
        return 2.0 * cross - within - self.self_term


@pytest.fixture(scope="session")
def energy_oracle() -> EnergyOracle:
    rng = np.random.default_rng(0)
    draws = rng.standard_normal((50_000, 2))
    return EnergyOracle(draws=draws, self_term=mean_pairwise_norm(draws, draws))


@pytest.fixture(scope="session")
def stein_descent(energy_oracle: EnergyOracle) -> list[float]:
    """Energy distance every 100 steps of the 200-particle descent run.

    200 particles start at N((3,3), 0.5*I) and follow x <- x + 0.05*g for
    500 steps against a standard-normal target. Returns the energy distance
    at steps 0, 100, ..., 500 (six checkpoints plus the start).
    """
    rng = np.random.default_rng(2)
    X = rng.normal(loc=3.0, scale=np.sqrt(0.5), size=(200, 2))
    target = GaussianMixture(
        weights=np.array([1.0]),
        means=np.zeros((1, 2)),
        covariances=np.eye(2)[None],
    )
    cfg = SteinConfig(bandwidth="median")
    checkpoints = [energy_oracle(X)]
    for step in range(1, 501):
        X = X + 0.05 * stein_flow(X, target, cfg).a
        if step % 100 == 0:
            checkpoints.append(energy_oracle(X))
    return checkpoints
