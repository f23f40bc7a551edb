"""Reference distributions over the workspace.

Two interchangeable forms of the coverage target: a Gaussian mixture with
an analytic score function, and a plain point cloud with uniform weights.
Both sample deterministically from an explicit seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import numpy.typing as npt
from scipy.linalg import cho_solve, cholesky

DoubleVector = npt.NDArray[np.float64]
DoubleMatrix = npt.NDArray[np.float64]

SeedLike = Union[int, Sequence[int]]

_LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class GaussianMixture:
    """Score-based reference: mixture of k Gaussians on a d-dim workspace.

    weights: (k,), positive, summing to 1 within 1e-12.
    means: (k, d). covariances: (k, d, d), each symmetric positive definite.
    """

    weights: DoubleVector
    means: DoubleMatrix
    covariances: npt.NDArray[np.float64]

    def __post_init__(self) -> None:
        w = np.asarray(self.weights, dtype=np.float64)
        mu = np.asarray(self.means, dtype=np.float64)
        cov = np.asarray(self.covariances, dtype=np.float64)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", mu)
        object.__setattr__(self, "covariances", cov)
        if w.ndim != 1 or mu.ndim != 2 or cov.ndim != 3:
            raise ValueError("expected weights (k,), means (k, d), covariances (k, d, d)")
        k, d = mu.shape
        if w.shape[0] != k or cov.shape != (k, d, d):
            raise ValueError("component counts of weights, means, covariances disagree")
        if not (np.isfinite(w).all() and np.isfinite(mu).all() and np.isfinite(cov).all()):
            raise ValueError("mixture parameters must be finite")
        if (w <= 0).any():
            raise ValueError("mixture weights must be positive")
        if abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"mixture weights must sum to 1, got {w.sum()!r}")
        chols = np.empty_like(cov)
        for i in range(k):
            if not np.allclose(cov[i], cov[i].T, atol=1e-12):
                raise ValueError(f"covariance {i} is not symmetric")
            try:
                chols[i] = cholesky(cov[i], lower=True)
            except np.linalg.LinAlgError as exc:
                raise ValueError(f"covariance {i} is not positive definite") from exc
        # Cached factorizations; log_norm[i] = log((2 pi)^(d/2) det(chol_i)).
        log_norm = 0.5 * d * _LOG_2PI + np.log(np.diagonal(chols, axis1=1, axis2=2)).sum(axis=1)
        object.__setattr__(self, "_chols", chols)
        object.__setattr__(self, "_log_norm", log_norm)
        object.__setattr__(self, "_log_w", np.log(w))

    @property
    def dim(self) -> int:
        return self.means.shape[1]

    @property
    def num_components(self) -> int:
        return self.means.shape[0]

    def _component_terms(self, X: DoubleMatrix) -> tuple[DoubleMatrix, np.ndarray]:
        """Per-component log densities (n, k) and whitened pulls (k, n, d).

        The pull for component i is Sigma_i^{-1} (x - mu_i); the score is its
        responsibility-weighted negative sum.
        """
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        n = X.shape[0]
        k = self.num_components
        log_pdf = np.empty((n, k))
        pulls = np.empty((k, n, X.shape[1]))
        for i in range(k):
            diff = X - self.means[i]
            pull = cho_solve((self._chols[i], True), diff.T).T
            pulls[i] = pull
            quad = np.einsum("nd,nd->n", diff, pull)
            log_pdf[:, i] = -0.5 * quad - self._log_norm[i]
        return log_pdf, pulls

    def log_density(self, X: DoubleMatrix) -> DoubleVector:
        """log q(x) for each row of X."""
        log_pdf, _ = self._component_terms(X)
        s = log_pdf + self._log_w
        mx = s.max(axis=1)
        return mx + np.log(np.exp(s - mx[:, None]).sum(axis=1))

    def score(self, X: DoubleMatrix) -> DoubleMatrix:
        """grad log q(x) for each row of X, via stabilized responsibilities."""
        log_pdf, pulls = self._component_terms(X)
        s = log_pdf + self._log_w
        s -= s.max(axis=1, keepdims=True)
        resp = np.exp(s)
        resp /= resp.sum(axis=1, keepdims=True)
        return -np.einsum("nk,knd->nd", resp, pulls)

    def sample(self, n: int, seed: SeedLike) -> DoubleMatrix:
        """n ancestral draws, deterministic in the seed."""
        if n < 1:
            raise ValueError(f"sample count must be >= 1, got {n}")
        rng = np.random.default_rng(seed)
        comp = rng.choice(self.num_components, size=n, p=self.weights)
        z = rng.standard_normal((n, self.dim))
        return self.means[comp] + np.einsum("nij,nj->ni", self._chols[comp], z)


@dataclass(frozen=True)
class SamplePoints:
    """Sample-based reference: m workspace points with uniform weights."""

    points: DoubleMatrix

    def __post_init__(self) -> None:
        pts = np.atleast_2d(np.asarray(self.points, dtype=np.float64))
        object.__setattr__(self, "points", pts)
        if pts.shape[0] < 1:
            raise ValueError("need at least one point")
        if not np.isfinite(pts).all():
            raise ValueError("reference points must be finite")

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def sample(self, n: int, seed: SeedLike) -> DoubleMatrix:
        """n draws with replacement, deterministic in the seed."""
        if n < 1:
            raise ValueError(f"sample count must be >= 1, got {n}")
        rng = np.random.default_rng(seed)
        idx = rng.integers(0, self.points.shape[0], size=n)
        return self.points[idx]


ReferenceDistribution = Union[GaussianMixture, SamplePoints]


def to_sample_based(q: GaussianMixture, m: int, seed: SeedLike) -> SamplePoints:
    """Freeze a mixture into m drawn points so plan-by-transport can use it."""
    if m < 1:
        raise ValueError(f"sample count must be >= 1, got {m}")
    return SamplePoints(points=q.sample(m, seed))


# Default benchmark task: three well-separated modes inside the unit
# square, lifted to the unit cube for 3D workspaces.
_FIXTURE_MEANS_2D = ((0.25, 0.25), (0.75, 0.35), (0.4, 0.8))
_FIXTURE_Z = (0.25, 0.75, 0.5)
_FIXTURE_VARIANCE = 0.02


def benchmark_mixture(dim: int = 2) -> GaussianMixture:
    """The default 3-mode coverage task on the unit square or cube."""
    if dim == 2:
        means = np.array(_FIXTURE_MEANS_2D)
    elif dim == 3:
        means = np.array([m + (z,) for m, z in zip(_FIXTURE_MEANS_2D, _FIXTURE_Z)])
    else:
        raise ValueError(f"fixture is defined for dim 2 or 3, got {dim}")
    k = means.shape[0]
    covs = np.tile(_FIXTURE_VARIANCE * np.eye(dim), (k, 1, 1))
    return GaussianMixture(weights=np.full(k, 1.0 / k), means=means, covariances=covs)
