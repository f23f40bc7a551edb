"""Artifact file formats: trajectory CSV, point CSV, metrics JSON."""

import numpy as np
import pytest

from flowcover import Trajectory, differential_drive, single_integrator_2d
from flowcover.io import (
    TrajectoryFormatError,
    read_metrics,
    read_points,
    read_trajectory,
    trajectory_header,
    write_metrics,
    write_points,
    write_trajectory,
)


def sample_trajectory(model, T=9, seed=0):
    rng = np.random.default_rng(seed)
    return Trajectory(
        S=rng.standard_normal((T + 1, model.state_dim)),
        U=rng.standard_normal((T, model.control_dim)),
        dt=0.05,
    )


def test_trajectory_round_trip_is_bit_exact(tmp_path):
    model = differential_drive()
    traj = sample_trajectory(model)
    path = tmp_path / "trajectory.csv"
    write_trajectory(path, traj, model)
    back = read_trajectory(path, model)
    assert np.array_equal(back.S, traj.S)
    assert np.array_equal(back.U, traj.U)
    assert back.dt == traj.dt


def test_header_names_states_and_controls(tmp_path):
    model = single_integrator_2d()
    path = tmp_path / "trajectory.csv"
    write_trajectory(path, sample_trajectory(model), model)
    first_line = path.read_text().splitlines()[0]
    assert first_line == trajectory_header(model)
    assert first_line.startswith("t,")


def test_reading_with_wrong_model_fails_on_header(tmp_path):
    path = tmp_path / "trajectory.csv"
    write_trajectory(path, sample_trajectory(single_integrator_2d()), single_integrator_2d())
    with pytest.raises(TrajectoryFormatError, match="header mismatch") as err:
        read_trajectory(path, differential_drive())
    assert err.value.row == 1


def test_malformed_cell_reports_one_based_row(tmp_path):
    model = single_integrator_2d()
    path = tmp_path / "trajectory.csv"
    write_trajectory(path, sample_trajectory(model, T=4), model)
    lines = path.read_text().splitlines()
    cells = lines[2].split(",")
    cells[1] = "not-a-number"
    lines[2] = ",".join(cells)
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TrajectoryFormatError, match="row 3"):
        read_trajectory(path, model)


def test_wrong_field_count_reports_row(tmp_path):
    model = single_integrator_2d()
    path = tmp_path / "trajectory.csv"
    write_trajectory(path, sample_trajectory(model, T=4), model)
    lines = path.read_text().splitlines()
    lines[4] += ",0.0"
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TrajectoryFormatError, match="expected 5 fields") as err:
        read_trajectory(path, model)
    assert err.value.row == 5


def test_empty_trajectory_file(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(TrajectoryFormatError, match="empty"):
        read_trajectory(path, single_integrator_2d())


def test_single_state_row_rejected(tmp_path):
    model = single_integrator_2d()
    path = tmp_path / "trajectory.csv"
    path.write_text(trajectory_header(model) + "\n0.0,0.0,0.0,,\n")
    with pytest.raises(TrajectoryFormatError, match="two state rows"):
        read_trajectory(path, model)


def test_missing_control_row_rejected(tmp_path):
    model = single_integrator_2d()
    path = tmp_path / "trajectory.csv"
    write_trajectory(path, sample_trajectory(model, T=4), model)
    lines = path.read_text().splitlines()
    cells = lines[2].split(",")
    lines[2] = ",".join(cells[:3] + ["", ""])  # blank out one control row
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(TrajectoryFormatError, match="control rows"):
        read_trajectory(path, model)


def test_points_round_trip(tmp_path):
    rng = np.random.default_rng(3)
    pts = rng.standard_normal((20, 2))
    path = tmp_path / "points.csv"
    write_points(path, pts, names=("x", "y"))
    assert np.array_equal(read_points(path), pts)
    write_points(path, pts)  # headerless form
    assert np.array_equal(read_points(path), pts)


def test_points_width_consistency(tmp_path):
    path = tmp_path / "points.csv"
    path.write_text("x,y\n0.0,1.0\n2.0\n")
    with pytest.raises(TrajectoryFormatError, match="expected 2 fields") as err:
        read_points(path)
    assert err.value.row == 3


def test_points_header_only_file(tmp_path):
    path = tmp_path / "points.csv"
    path.write_text("x,y\n")
    with pytest.raises(TrajectoryFormatError, match="no data rows"):
        read_points(path)
    path.write_text("")
    with pytest.raises(TrajectoryFormatError, match="empty"):
        read_points(path)


def test_metrics_json_round_trip(tmp_path):
    path = tmp_path / "metrics.json"
    payload = {
        "coverage": 0.123456789012345678,
        "iterations_used": 40,
        "flow_norms": [1.5, 0.25, 0.125],
        "method": "stein",
    }
    write_metrics(path, payload)
    assert read_metrics(path) == payload
    assert path.read_text().endswith("\n")
