"""Experiment harness: seeded closed-loop runs and benchmark tables.

A run places the robot at the start of a track with a small random
lateral and heading offset, then simulates one control period per tick
until the robot reaches the end of the track, the time budget runs out,
or the robot runs away from the path.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Literal

import numpy as np
import pandas as pd

from simplextrack.controllers import (
    Controller,
    ControllerInput,
    PurePursuitController,
    ScriptedTracker,
    UnsafeTracker,
    policy_file_controller,
)
from simplextrack.kinematics import KinematicsError, Pose, step
from simplextrack.path import Path, PathError, cosine_track, project, square_track
from simplextrack.reachability import SafeSet
from simplextrack.schemas import (
    AppConfig,
    BenchmarkReport,
    ReportRow,
    RobotLimits,
    RunConfig,
    RunMetrics,
    RunSummary,
    TrackParams,
)
from simplextrack.simplex import Mode, SimplexController, SwitchState, write_mode_trace

logger = logging.getLogger(__name__)

ExportFormat = Literal["csv", "runs-csv", "json", "xlsx", "pdf"]

# Measurements with trained policies in a physics simulator, for side-by-side
# display only: (mean_d, max_d, mean_v) per (controller, track).
REFERENCE_VALUES: dict[tuple[str, str], tuple[float, float, float]] = {
    ("pp", "cosine"): (0.067, 0.202, 0.498),
    ("pp", "square"): (0.164, 0.539, 0.490),
    ("scripted", "cosine"): (0.059, 0.227, 0.544),
    ("scripted", "square"): (0.305, 1.375, 0.730),
    ("unsafe", "cosine"): (0.838, 2.875, 0.784),
    ("unsafe", "square"): (1.092, 2.753, 0.805),
    ("simplex-scripted", "cosine"): (0.058, 0.192, 0.543),
    ("simplex-scripted", "square"): (0.182, 0.708, 0.492),
    ("simplex-unsafe", "cosine"): (0.165, 0.589, 0.589),
    ("simplex-unsafe", "square"): (0.198, 0.936, 0.500),
}
REFERENCE_SAFE_SET = {"set_max_d": 0.681, "shrunk_max_d": 0.631, "dwell_time": 12.45}

AnyController = Controller | SimplexController


class SimulationError(ValueError):
    """Raised when a run cannot be set up (unknown ids, missing safe set or policy)."""


@dataclass(frozen=True, slots=True)
class TickRecord:
    """State and command of one control period."""

    t: float
    x: float
    y: float
    theta: float
    d_signed: float
    theta_rel: float
    arclength: float
    v: float
    omega: float
    mode: Mode


@dataclass(frozen=True)
class RunResult:
    ticks: list[TickRecord]
    metrics: RunMetrics
    seed: int
    d0: float
    theta0: float

    def trajectory_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                (r.t, r.x, r.y, r.theta, r.d_signed, r.theta_rel, r.arclength, r.v, r.omega, r.mode)
                for r in self.ticks
            ],
            columns=[
                "t",
                "x",
                "y",
                "theta",
                "d_signed",
                "theta_rel",
                "arclength",
                "v",
                "omega",
                "mode",
            ],
        ).astype({"mode": str})

    def write_mode_trace(self, file: str | FilePath) -> None:
        write_mode_trace(self.ticks, file)


# ── factories ────────────────────────────────────────────────────────
def make_track(track_id: str, params: TrackParams | None = None) -> Path:
    params = params or TrackParams()
    if track_id == "square":
        return square_track(params.square)
    if track_id == "cosine":
        return cosine_track(params.cosine)
    raise SimulationError(f"unknown track {track_id!r}")


def make_controller(
    controller_id: str,
    config: AppConfig,
    safe_set: SafeSet | None = None,
    strategy: str = "instantaneous",
) -> AnyController:
    """Build a controller from its id (``pp``, ``scripted``, ``simplex-unsafe``, ...)."""
    limits = config.limits
    if controller_id.startswith("simplex-"):
        if safe_set is None:
            raise SimulationError(f"{controller_id} needs a safe set (build-set first)")
        if strategy not in ("instantaneous", "predictive"):
            raise SimulationError(f"unknown decision strategy {strategy!r}")
        hp = make_controller(controller_id.removeprefix("simplex-"), config)
        if not isinstance(hp, Controller):
            raise SimulationError(f"cannot nest simplex controllers: {controller_id!r}")
        return SimplexController(
            hp=hp,
            ha=PurePursuitController(config.pure_pursuit, limits),
            safe_set=safe_set,
            strategy=strategy,  # type: ignore[arg-type]
            limits=limits,
        )
    if controller_id == "pp":
        return PurePursuitController(config.pure_pursuit, limits)
    if controller_id == "scripted":
        return ScriptedTracker(config.tracker, limits)
    if controller_id == "unsafe":
        return UnsafeTracker(config.tracker, config.perturbation, limits)
    if controller_id == "policy":
        if config.policy_file is None:
            raise SimulationError("the policy controller needs policy_file in the config")
        return policy_file_controller(config.policy_file, limits)
    raise SimulationError(f"unknown controller {controller_id!r}")


def _standalone_mode(controller: Controller) -> Mode:
    if isinstance(controller, PurePursuitController):
        return Mode.HIGH_ASSURANCE
    return Mode.HIGH_PERFORMANCE


# ── single run ───────────────────────────────────────────────────────
def start_pose(path: Path, d0: float, theta0: float) -> Pose:
    """Pose at the first waypoint, *d0* to the left, heading offset *theta0*."""
    ux, uy = path.segment_units[0]
    x0, y0 = path.waypoints[0]
    return Pose(
        float(x0 - d0 * uy), float(y0 + d0 * ux), float(path.segment_headings[0]) + theta0
    )


def simulate_run(
    controller: AnyController,
    path: Path,
    config: RunConfig,
    seed: int,
    limits: RobotLimits | None = None,
) -> RunResult:
    """Simulate one closed-loop run.

    Args:
        controller: Plain controller or Simplex composition.
        path: Track to follow.
        config: Run settings (time budget, perturbation, completion tolerance).
        seed: Seed of the initial-offset draw.
        limits: Robot limits; the control period is the tick length.

    Returns:
        Per-tick trajectory and run metrics. A non-finite or runaway state
        ends the run early with ``aborted`` set and a diagnostic.
    """
    limits = limits or RobotLimits()
    period = limits.control_period
    rng = np.random.default_rng(seed)
    pert = config.perturbation
    d0_draw, theta0_draw = rng.uniform(-1.0, 1.0, size=2)
    d0 = pert.d0 if pert.d0 is not None else float(d0_draw * pert.d0_max)
    theta0 = pert.theta0 if pert.theta0 is not None else float(theta0_draw * pert.theta0_max)

    pose = start_pose(path, d0, theta0)
    frame = project(path, pose.position, pose.theta, hint=0.0)
    state: SwitchState | None = None
    fixed_mode: Mode | None = None
    if isinstance(controller, SimplexController):
        state = controller.initial_state(frame, 0.0)
    else:
        fixed_mode = _standalone_mode(controller)

    n_max = math.floor(config.max_sim_time / period + 1e-9)
    goal = path.length - config.completion_tolerance
    ticks: list[TickRecord] = []
    aborted = False
    diagnostic: str | None = None

    for k in range(n_max):
        if frame.arclength >= goal:
            break
        t = k * period
        inp = ControllerInput(pose=pose, frame=frame, path=path, time=t)
        if isinstance(controller, SimplexController):
            assert state is not None
            cmd, mode, state = controller.step(inp, state)
        else:
            cmd = controller.compute(inp)
            assert fixed_mode is not None
            mode = fixed_mode
        ticks.append(
            TickRecord(
                t=t,
                x=pose.x,
                y=pose.y,
                theta=pose.theta,
                d_signed=frame.d_signed,
                theta_rel=frame.theta_rel,
                arclength=frame.arclength,
                v=cmd.v,
                omega=cmd.omega,
                mode=mode,
            )
        )
        try:
            pose = step(pose, cmd, period)
            frame = project(path, pose.position, pose.theta, hint=frame.arclength)
        except (KinematicsError, PathError) as exc:
            aborted, diagnostic = True, f"non-finite state after t={t:.2f} s: {exc}"
            break
        if abs(frame.d_signed) > config.runaway_distance:
            aborted = True
            diagnostic = f"runaway: |d|={abs(frame.d_signed):.2f} m at t={t + period:.2f} s"
            break

    if aborted:
        logger.warning("Run (seed %d) aborted: %s", seed, diagnostic)

    distances = [abs(tick.d_signed) for tick in ticks] + [abs(frame.d_signed)]
    n_ticks = len(ticks)
    n_ha = sum(1 for tick in ticks if tick.mode is Mode.HIGH_ASSURANCE)
    metrics = RunMetrics(
        mean_d=math.fsum(distances) / len(distances),
        max_d=max(distances),
        mean_v=math.fsum(tick.v for tick in ticks) / n_ticks if n_ticks else 0.0,
        completion=frame.arclength >= goal,
        switches_to_ha=state.switch_count_to_ha if state is not None else 0,
        switches_to_hp=state.switch_count_to_hp if state is not None else 0,
        fraction_time_ha=n_ha / n_ticks if n_ticks else 0.0,
        duration=n_ticks * period,
        aborted=aborted,
        diagnostic=diagnostic,
    )
    logger.debug(
        "Run seed=%d %s: mean_d=%.3f max_d=%.3f mean_v=%.3f",
        seed,
        controller.name,
        metrics.mean_d,
        metrics.max_d,
        metrics.mean_v,
    )
    return RunResult(ticks=ticks, metrics=metrics, seed=seed, d0=d0, theta0=theta0)


# ── benchmark ────────────────────────────────────────────────────────
def _run_task(
    task: tuple[RunConfig, int, AppConfig, SafeSet | None],
) -> RunSummary:
    config, index, app, safe_set = task
    controller = make_controller(config.controller, app, safe_set, config.strategy)
    path = make_track(config.track, app.tracks)
    seed = config.seed + index
    result = simulate_run(controller, path, config, seed, app.limits)
    return RunSummary(
        controller=config.controller,
        track=config.track,
        run_index=index,
        seed=seed,
        metrics=result.metrics,
    )


def aggregate(config: RunConfig, runs: Sequence[RunSummary]) -> ReportRow:
    """Table row for one configuration; sums are exactly rounded so run order is irrelevant."""
    n = len(runs)
    metrics = [run.metrics for run in runs]
    return ReportRow(
        controller=config.controller,
        track=config.track,
        mean_d=math.fsum(m.mean_d for m in metrics) / n,
        max_d=max(m.max_d for m in metrics),
        mean_v=math.fsum(m.mean_v for m in metrics) / n,
        switches_to_ha=math.fsum(m.switches_to_ha for m in metrics) / n,
        fraction_time_ha=math.fsum(m.fraction_time_ha for m in metrics) / n,
        n_runs=n,
        completion_rate=sum(m.completion for m in metrics) / n,
    )


def benchmark(
    configs: Sequence[RunConfig],
    app: AppConfig | None = None,
    safe_set: SafeSet | None = None,
    workers: int = 1,
) -> BenchmarkReport:
    """Run every configuration ``n_runs`` times and aggregate one row per configuration."""
    app = app or AppConfig()
    tasks = [(config, index, app, safe_set) for config in configs for index in range(config.n_runs)]
    logger.info("Benchmark: %d configurations, %d runs", len(configs), len(tasks))
    if workers <= 1:
        summaries = [_run_task(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            summaries = list(executor.map(_run_task, tasks))

    rows = []
    offset = 0
    for config in configs:
        runs = summaries[offset : offset + config.n_runs]
        offset += config.n_runs
        row = aggregate(config, runs)
        if config.track == "cosine" and config.controller == "simplex-scripted" and any(
            run.metrics.switches_to_ha for run in runs
        ):
            logger.warning("simplex-scripted switched to assurance on the cosine track")
        rows.append(row)

    return BenchmarkReport(
        rows=rows,
        runs=summaries,
        safe_set=safe_set.summary() if safe_set is not None else None,
    )


def reference_frame(report: BenchmarkReport) -> pd.DataFrame:
    """Measured and reference (mean_d, max_d, mean_v) side by side."""
    records = []
    for row in report.rows:
        ref = REFERENCE_VALUES.get((row.controller, row.track))
        records.append(
            {
                "controller": row.controller,
                "track": row.track,
                "mean_d": row.mean_d,
                "ref_mean_d": ref[0] if ref else None,
                "max_d": row.max_d,
                "ref_max_d": ref[1] if ref else None,
                "mean_v": row.mean_v,
                "ref_mean_v": ref[2] if ref else None,
            }
        )
    return pd.DataFrame(records)


def export_report(report: BenchmarkReport, file: str | FilePath, fmt: ExportFormat = "csv") -> None:
    """Write *report* as ``csv`` (one row per configuration), ``runs-csv`` (one
    row per run), ``json``, ``xlsx`` or ``pdf``."""
    from simplextrack import report as pdf_report
    from simplextrack import tables

    target = FilePath(file)
    if fmt == "csv":
        tables.export_to_csv(tables.report_rows_frame(report), target)
    elif fmt == "runs-csv":
        tables.export_to_csv(tables.run_rows_frame(report), target)
    elif fmt == "json":
        target.write_text(report.model_dump_json(indent=2))
    elif fmt == "xlsx":
        tables.export_report_workbook(report, target)
    elif fmt == "pdf":
        pdf_report.draw_pdf(target, report)
    else:
        raise ValueError(f"unknown report format {fmt!r}")


def load_report(file: str | FilePath) -> BenchmarkReport:
    return BenchmarkReport.model_validate_json(FilePath(file).read_text())


__all__ = [
    "REFERENCE_SAFE_SET",
    "REFERENCE_VALUES",
    "RunResult",
    "SimulationError",
    "TickRecord",
    "aggregate",
    "benchmark",
    "export_report",
    "load_report",
    "make_controller",
    "make_track",
    "reference_frame",
    "simulate_run",
    "start_pose",
]
