"""Benchmark harness: sweep mechanics, CSV persistence, scaling fits.

Planner stubs keep these tests fast; the real planners only meet the
harness in the acceptance suite.
"""

import math

import numpy as np
import pytest

from flowcover import (
    BenchRecord,
    BenchSpec,
    Trajectory,
    fit_scaling,
    flow_speedup,
    run_bench,
)
from flowcover.bench import CSV_HEADER, PlannerRun, median_times, read_records, write_plot


def tiny_trajectory(horizon):
    return Trajectory(
        S=np.zeros((horizon + 1, 2)), U=np.zeros((horizon, 2)), dt=0.05
    )


def make_stub(calls=None, fail_at=None, flow_time=None):
    """Planner stub recording its calls; optionally failing at one horizon."""

    def run(horizon, workers):
        if calls is not None:
            calls.append((horizon, workers))
        if fail_at is not None and horizon == fail_at:
            raise ValueError("synthetic failure")
        t_flow = flow_time(horizon, workers) if flow_time is not None else 1e-3
        return PlannerRun(
            trajectory=tiny_trajectory(horizon),
            t_flow=t_flow,
            t_lqr=1e-3,
            t_rollout=1e-3,
        )

    return run


def length_metric(trajectory):
    return float(len(trajectory.S))


def synth_records(method, horizons, times, reps=1, workers=1, flow=None):
    out = []
    for h, t in zip(horizons, times):
        for rep in range(reps):
            out.append(
                BenchRecord(
                    method=method,
                    model="diff_drive",
                    horizon=h,
                    rep=rep,
                    workers=workers,
                    seed=0,
                    t_total_s=t,
                    t_flow_s=flow[h] if flow else t / 2,
                    t_lqr_s=t / 4,
                    t_rollout_s=t / 8,
                    coverage=0.1,
                    status="ok",
                )
            )
    return out


# --- sweep mechanics ---


def test_sweep_produces_one_record_per_cell():
    spec = BenchSpec(methods=("stein",), horizons=(100, 200), reps=2)
    records = run_bench(spec, planners={"stein": make_stub()}, metric=length_metric)
    assert len(records) == 4
    assert {(r.horizon, r.rep) for r in records} == {(100, 0), (100, 1), (200, 0), (200, 1)}
    assert all(r.status == "ok" for r in records)
    assert all(r.method == "stein" and r.workers == 1 for r in records)


def test_warmup_runs_are_executed_but_not_recorded():
    calls = []
    spec = BenchSpec(
        methods=("stein",), horizons=(100, 200), reps=2, workers_sweep=(1, 2)
    )
    records = run_bench(spec, planners={"stein": make_stub(calls)}, metric=length_metric)
    # per horizon: one warm-up plus reps x workers timed runs
    assert len(calls) == 2 * (1 + 2 * 2)
    assert len(records) == 2 * 2 * 2
    for horizon in (100, 200):
        assert calls.count((horizon, 1)) == 1 + 2  # warm-up shares workers_sweep[0]
        assert calls.count((horizon, 2)) == 2


def test_tour_baseline_is_capped():
    calls = []
    spec = BenchSpec(methods=("tsp",), horizons=(500, 1000, 2000), reps=1)
    records = run_bench(spec, planners={"tsp": make_stub(calls)}, metric=length_metric)
    assert {r.horizon for r in records} == {500, 1000}
    assert all(h <= 1000 for h, _ in calls)


def test_missing_planner_is_rejected():
    spec = BenchSpec(methods=("stein", "tsp"), horizons=(100,), reps=1)
    with pytest.raises(ValueError, match="no planner registered"):
        run_bench(spec, planners={"stein": make_stub()}, metric=length_metric)


def test_failing_run_becomes_error_row_and_sweep_continues():
    spec = BenchSpec(methods=("stein",), horizons=(100, 200, 300), reps=1)
    records = run_bench(
        spec, planners={"stein": make_stub(fail_at=200)}, metric=length_metric
    )
    by_horizon = {r.horizon: r for r in records}
    assert by_horizon[200].status == "error:ValueError"
    assert math.isnan(by_horizon[200].coverage)
    assert by_horizon[200].t_flow_s == 0.0
    assert by_horizon[100].status == "ok" and by_horizon[300].status == "ok"


def test_coverage_column_reproducible_across_runs():
    spec = BenchSpec(methods=("stein",), horizons=(100, 200), reps=2)
    a = run_bench(spec, planners={"stein": make_stub()}, metric=length_metric)
    b = run_bench(spec, planners={"stein": make_stub()}, metric=length_metric)
    assert [r.coverage for r in a] == [r.coverage for r in b]
    assert [r.coverage for r in a] == [101.0, 101.0, 201.0, 201.0]


# --- persistence ---


def test_csv_round_trip_preserves_records(tmp_path):
    path = tmp_path / "bench.csv"
    spec = BenchSpec(methods=("stein",), horizons=(100, 200), reps=1)
    records = run_bench(
        spec,
        planners={"stein": make_stub(fail_at=200)},
        metric=length_metric,
        csv_path=path,
    )
    text = path.read_text().splitlines()
    assert text[0] == CSV_HEADER
    back = read_records(path)
    assert len(back) == len(records) == 2
    assert back[0] == records[0]
    # nan coverage defeats dataclass equality, so the error row is checked fieldwise
    assert back[1].status == "error:ValueError"
    assert math.isnan(back[1].coverage)
    assert (back[1].horizon, back[1].t_total_s) == (records[1].horizon, records[1].t_total_s)


def test_csv_appends_to_existing_file(tmp_path):
    path = tmp_path / "bench.csv"
    spec = BenchSpec(methods=("stein",), horizons=(100,), reps=1)
    run_bench(spec, planners={"stein": make_stub()}, metric=length_metric, csv_path=path)
    run_bench(spec, planners={"stein": make_stub()}, metric=length_metric, csv_path=path)
    assert len(read_records(path)) == 2
    assert path.read_text().count(CSV_HEADER) == 1


def test_read_records_rejects_wrong_header(tmp_path):
    path = tmp_path / "not_bench.csv"
    path.write_text("a,b,c\n1,2,3\n")
    with pytest.raises(ValueError, match="header"):
        read_records(path)


def test_malformed_row_names_field_count():
    with pytest.raises(ValueError, match="expected 12 fields"):
        BenchRecord.from_csv_row("stein,diff_drive,100,0,1")


# --- analysis ---


def test_fit_recovers_quadratic_exponent():
    horizons = [100, 200, 400, 800, 1600]
    records = synth_records("stein", horizons, [3e-7 * h**2 for h in horizons], reps=3)
    fit = fit_scaling(records, "stein", phase="total")
    assert fit.alpha == pytest.approx(2.0, abs=0.01)
    assert fit.ci95 <= 0.01
    assert fit.num_horizons == 5


def test_fit_recovers_linear_exponent():
    horizons = [100, 200, 400, 800]
    records = synth_records("tsp", horizons, [5e-5 * h for h in horizons])
    fit = fit_scaling(records, "tsp", phase="total")
    assert fit.alpha == pytest.approx(1.0, abs=0.01)


def test_fit_needs_four_distinct_horizons():
    records = synth_records("stein", [100, 200, 400], [1.0, 2.0, 4.0])
    with pytest.raises(ValueError, match="at least 4"):
        fit_scaling(records, "stein")


def test_fit_rejects_zero_medians():
    records = synth_records("stein", [100, 200, 400, 800], [0.0, 1.0, 2.0, 3.0])
    with pytest.raises(ValueError, match="log-log"):
        fit_scaling(records, "stein")


def test_median_times_skips_error_rows():
    records = synth_records("stein", [100, 200], [1.0, 2.0], reps=3)
    records.append(
        BenchRecord(
            method="stein", model="diff_drive", horizon=100, rep=3, workers=1,
            seed=0, t_total_s=999.0, t_flow_s=0.0, t_lqr_s=0.0, t_rollout_s=0.0,
            coverage=float("nan"), status="error:ValueError",
        )
    )
    med = median_times(records, "stein", "total")
    assert med == {100: 1.0, 200: 2.0}
    with pytest.raises(ValueError, match="phase"):
        median_times(records, "stein", "walltime")


def test_flow_speedup_from_worker_sweep():
    low = synth_records("stein", [1000], [1.0], reps=3, workers=1, flow={1000: 0.8})
    high = synth_records("stein", [1000], [0.3], reps=3, workers=8, flow={1000: 0.1})
    assert flow_speedup(low + high, "stein") == pytest.approx(8.0)
    with pytest.raises(ValueError, match="distinct worker"):
        flow_speedup(low, "stein")


def test_plot_writes_svg(tmp_path):
    records = synth_records("stein", [100, 200, 400, 800], [0.1, 0.2, 0.4, 0.8])
    records += synth_records("tsp", [100, 200, 400, 800], [0.05, 0.3, 1.0, 4.0])
    out = tmp_path / "time_vs_horizon.svg"
    write_plot(records, out)
    assert out.exists()
    assert b"<svg" in out.read_bytes()[:1000]


# --- spec validation ---


@pytest.mark.parametrize(
    "kwargs,message",
    [
        ({"methods": ("gradient",)}, "unknown method"),
        ({"methods": ()}, "nonempty"),
        ({"horizons": (200, 100)}, "strictly increasing"),
        ({"horizons": (100, 100)}, "strictly increasing"),
        ({"reps": 0}, "reps"),
        ({"workers_sweep": (0,)}, "workers_sweep"),
        ({"dt": 0.0}, "dt"),
        ({"metric_samples": 0}, "metric_samples"),
    ],
)
def test_spec_validation(kwargs, message):
    with pytest.raises(ValueError, match=message):
        BenchSpec(**kwargs)
