"""File formats for run artifacts.

Trajectories go to CSV with one row per time step (the final row has no
control columns), metrics go to JSON, and point sets are plain numeric
CSV with an optional header line. Floats are written with repr so a
read-back reproduces them bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from .dynamics import DynamicsModel, Trajectory


class TrajectoryFormatError(ValueError):
    """A trajectory or point CSV that cannot be parsed; carries the row."""

    def __init__(self, message: str, row: int | None = None):
        self.row = row
        super().__init__(message if row is None else f"row {row}: {message}")


def trajectory_header(model: DynamicsModel) -> str:
    return ",".join(("t",) + model.state_names + tuple(f"u_{c}" for c in model.control_names))


def write_trajectory(path: str | Path, trajectory: Trajectory, model: DynamicsModel) -> None:
    S, U, dt = trajectory.S, trajectory.U, trajectory.dt
    lines = [trajectory_header(model)]
    for k in range(len(S)):
        cells = [repr(k * dt)] + [repr(float(v)) for v in S[k]]
        if k < len(U):
            cells += [repr(float(v)) for v in U[k]]
        else:
            cells += [""] * U.shape[1]
        lines.append(",".join(cells))
    Path(path).write_text("\n".join(lines) + "\n")


def read_trajectory(path: str | Path, model: DynamicsModel) -> Trajectory:
    """Parse a trajectory CSV written for this model.

    Errors carry the 1-based row number of the offending line.
    """
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TrajectoryFormatError(f"{path} is empty")
    expected = trajectory_header(model)
    if lines[0] != expected:
        raise TrajectoryFormatError(
            f"header mismatch: expected {expected!r}, got {lines[0]!r}", row=1
        )
    n, m = model.state_dim, model.control_dim
    width = 1 + n + m
    states: list[list[float]] = []
    controls: list[list[float]] = []
    dt = None
    for i, line in enumerate(lines[1:], start=2):
        cells = line.split(",")
        if len(cells) != width:
            raise TrajectoryFormatError(
                f"expected {width} fields, got {len(cells)}", row=i
            )
        try:
            t = float(cells[0])
            state = [float(c) for c in cells[1 : 1 + n]]
            tail = cells[1 + n :]
            if any(c.strip() for c in tail):
                controls.append([float(c) for c in tail])
        except ValueError as exc:
            raise TrajectoryFormatError(str(exc), row=i) from None
        states.append(state)
        if i == 3:
            dt = t
    if len(states) < 2:
        raise TrajectoryFormatError("need at least two state rows (one step)")
    if len(controls) != len(states) - 1:
        raise TrajectoryFormatError(
            f"{len(states)} state rows need {len(states) - 1} control rows, "
            f"got {len(controls)}"
        )
    return Trajectory(
        S=np.asarray(states, dtype=np.float64),
        U=np.asarray(controls, dtype=np.float64),
        dt=float(dt),
    )


def read_points(path: str | Path) -> npt.NDArray[np.float64]:
    """Plain numeric CSV of points, one row each; a header line is skipped."""
    text = Path(path).read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise TrajectoryFormatError(f"{path} is empty")
    start = 0
    try:
        [float(c) for c in lines[0].split(",")]
    except ValueError:
        start = 1
    rows: list[list[float]] = []
    width = None
    for i, line in enumerate(lines[start:], start=start + 1):
        cells = line.split(",")
        if width is None:
            width = len(cells)
        elif len(cells) != width:
            raise TrajectoryFormatError(
                f"expected {width} fields, got {len(cells)}", row=i
            )
        try:
            rows.append([float(c) for c in cells])
        except ValueError as exc:
            raise TrajectoryFormatError(str(exc), row=i) from None
    if not rows:
        raise TrajectoryFormatError(f"{path} has no data rows")
    return np.asarray(rows, dtype=np.float64)


def write_points(path: str | Path, points: npt.NDArray[np.float64], names: tuple[str, ...] | None = None) -> None:
    points = np.asarray(points, dtype=np.float64)
    lines = []
    if names is not None:
        lines.append(",".join(names))
    for row in points:
        lines.append(",".join(repr(float(v)) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def write_metrics(path: str | Path, payload: dict[str, Any]) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_metrics(path: str | Path) -> dict[str, Any]:
    return json.loads(Path(path).read_text())
