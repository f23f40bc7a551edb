"""Shared container for evaluated flow fields."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import numpy.typing as npt

DoubleMatrix = npt.NDArray[np.float64]


@dataclass(frozen=True)
class FlowField:
    """One flow vector per trajectory time step, shape (T, workspace_dim).

    bandwidth/clamped describe the kernel bandwidth actually used when a
    kernel flow produced this field; converged/marginal_error carry the
    transport solver's state when a transport flow produced it.
    """

    a: DoubleMatrix
    bandwidth: float | None = None
    clamped: bool = False
    converged: bool = True
    marginal_error: float = 0.0

    def __post_init__(self) -> None:
        a = np.atleast_2d(np.asarray(self.a, dtype=np.float64))
        object.__setattr__(self, "a", a)
        if not np.isfinite(a).all():
            raise ValueError("flow field entries must be finite")

    @property
    def num_steps(self) -> int:
        return self.a.shape[0]

    def magnitudes(self) -> npt.NDArray[np.float64]:
        """Euclidean norm of each flow vector."""
        return np.sqrt((self.a * self.a).sum(axis=1))

    def mean_magnitude(self) -> float:
        return float(self.magnitudes().mean())
