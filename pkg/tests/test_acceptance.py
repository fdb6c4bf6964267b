"""End-to-end checks of the Simplex guarantees over full 30-run benchmarks."""

import numpy as np
import pytest

from simplextrack.harness import (
    benchmark,
    export_report,
    make_controller,
    make_track,
    simulate_run,
)
from simplextrack.kinematics import wrap_angle
from simplextrack.reachability import membership, resimulate
from simplextrack.schemas import AppConfig, RunConfig
from simplextrack.simplex import Mode
from tests.conftest import SMALL_SWEEP

pytestmark = pytest.mark.slow

N_RUNS = 30
SAFETY_BOUND = 1.0


def _rows(report):
    return {(row.controller, row.track): row for row in report.rows}


def _runs(report, controller, track):
    return [run for run in report.runs if (run.controller, run.track) == (controller, track)]


@pytest.fixture(scope="module")
def report(safe_set):
    configs = [
        RunConfig(controller=controller, track=track, n_runs=N_RUNS)
        for controller in ("pp", "scripted", "unsafe", "simplex-scripted", "simplex-unsafe")
        for track in ("square", "cosine")
    ]
    return benchmark(configs, safe_set=safe_set)


def test_unsafe_tracker_leaves_the_corridor(report):
    runs = _runs(report, "unsafe", "square")
    assert len(runs) == N_RUNS
    assert sum(run.metrics.max_d > SAFETY_BOUND for run in runs) >= 25


@pytest.mark.parametrize("track", ["square", "cosine"])
def test_simplex_keeps_unsafe_tracker_in_the_corridor(report, track):
    runs = _runs(report, "simplex-unsafe", track)
    assert len(runs) == N_RUNS
    assert all(run.metrics.max_d <= SAFETY_BOUND for run in runs)
    assert not any(run.metrics.aborted for run in runs)


@pytest.mark.parametrize("hp", ["scripted", "unsafe"])
@pytest.mark.parametrize("track", ["square", "cosine"])
def test_wrapper_never_worsens_the_worst_case(report, hp, track):
    rows = _rows(report)
    wrapped = rows[(f"simplex-{hp}", track)]
    plain = rows[(hp, track)]
    assert wrapped.max_d <= max(SAFETY_BOUND, plain.max_d)


@pytest.mark.parametrize("hp", ["scripted", "unsafe"])
@pytest.mark.parametrize("track", ["square", "cosine"])
def test_wrapped_speed_lies_between_constituents(report, hp, track):
    rows = _rows(report)
    constituents = (rows[("pp", track)].mean_v, rows[(hp, track)].mean_v)
    wrapped = rows[(f"simplex-{hp}", track)].mean_v
    assert 0.95 * min(constituents) <= wrapped <= 1.05 * max(constituents)


def test_benign_track_passes_through(report):
    runs = _runs(report, "simplex-scripted", "cosine")
    assert all(run.metrics.switches_to_ha == 0 for run in runs)
    assert all(run.metrics.fraction_time_ha == 0.0 for run in runs)
    rows = _rows(report)
    wrapped = rows[("simplex-scripted", "cosine")].mean_v
    plain = rows[("scripted", "cosine")].mean_v
    assert wrapped == pytest.approx(plain, rel=0.02)


@pytest.mark.parametrize("controller_id", ["simplex-unsafe", "simplex-scripted"])
@pytest.mark.parametrize("track_id", ["square", "cosine"])
def test_switching_invariants(safe_set, controller_id, track_id):
    app = AppConfig()
    controller = make_controller(controller_id, app, safe_set)
    path = make_track(track_id)
    config = RunConfig(controller=controller_id, track=track_id)
    for seed in range(N_RUNS):
        ticks = simulate_run(controller, path, config, seed).ticks
        entered_ha = None
        for k, tick in enumerate(ticks):
            inside = membership(safe_set, tick.d_signed, tick.theta_rel)
            if not inside:
                assert tick.mode is Mode.HIGH_ASSURANCE
            if tick.mode is Mode.HIGH_PERFORMANCE:
                assert inside
            if k == 0:
                if tick.mode is Mode.HIGH_ASSURANCE:
                    entered_ha = tick.t
                continue
            previous = ticks[k - 1]
            if previous.mode is Mode.HIGH_PERFORMANCE and tick.mode is Mode.HIGH_ASSURANCE:
                entered_ha = tick.t
                turn = wrap_angle(
                    path.heading_at(tick.arclength) - path.heading_at(previous.arclength)
                )
                if abs(turn) <= app.heading_margin:
                    assert safe_set.contains(tick.d_signed, tick.theta_rel, shrunk=False)
            if previous.mode is Mode.HIGH_ASSURANCE and tick.mode is Mode.HIGH_PERFORMANCE:
                assert entered_ha is not None
                assert tick.t + 1e-9 >= entered_ha + safe_set.dwell_time


def test_in_set_cells_converge_again(safe_set):
    rng = np.random.default_rng(2024)
    cells = np.argwhere(safe_set.in_roa)
    for i, j in cells[rng.choice(len(cells), size=min(20, len(cells)), replace=False)]:
        d0 = SMALL_SWEEP.d0_range.lo + i * SMALL_SWEEP.d0_range.step
        theta0 = SMALL_SWEEP.theta0_range.lo + j * SMALL_SWEEP.theta0_range.step
        rp = float(rng.choice(SMALL_SWEEP.rp_range.values()))
        path_id = int(rng.integers(SMALL_SWEEP.n_paths))
        record = resimulate(SMALL_SWEEP, path_id, float(d0), float(theta0), rp)
        assert record.converged
        assert record.max_d < SAFETY_BOUND


def test_small_offset_converges_early():
    for path_id in range(SMALL_SWEEP.n_paths):
        record = resimulate(SMALL_SWEEP, path_id, 0.1, 0.0, 0.0)
        assert record.converged
        assert record.t_conv is not None
        assert record.t_conv < SMALL_SWEEP.horizon / 2


def test_bench_csv_is_byte_identical_across_workers(safe_set, tmp_path):
    configs = [
        RunConfig(controller=controller, track=track, n_runs=4, max_sim_time=60.0)
        for controller in ("unsafe", "simplex-unsafe")
        for track in ("square", "cosine")
    ]
    outputs = []
    for workers in (1, 2, 1):
        target = tmp_path / f"report_{len(outputs)}.csv"
        export_report(benchmark(configs, safe_set=safe_set, workers=workers), target)
        outputs.append(target.read_bytes())
    assert outputs[0] == outputs[1] == outputs[2]
    assert len(outputs[0].splitlines()) == 1 + len(configs)
