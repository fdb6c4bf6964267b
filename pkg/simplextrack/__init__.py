"""Simplextrack - Simplex-architecture path tracking with reachability safe sets."""

from simplextrack.controllers import (
    Controller,
    ControllerInput,
    PolicyTable,
    PurePursuitController,
    ScriptedTracker,
    UnsafeTracker,
)
from simplextrack.harness import RunResult, benchmark, export_report, simulate_run
from simplextrack.kinematics import ControlCommand, Pose, step
from simplextrack.path import Path, PathFrame, generate_random_path, project
from simplextrack.reachability import (
    SafeSet,
    SweepRecords,
    build_safe_set,
    load_safe_set,
    run_sweep,
    save_safe_set,
)
from simplextrack.schemas import (
    AppConfig,
    BenchmarkReport,
    RobotLimits,
    RunConfig,
    RunMetrics,
    SweepConfig,
)
from simplextrack.simplex import Mode, SimplexController, decide

__version__ = "0.1.0"

__all__ = [
    "AppConfig",
    "BenchmarkReport",
    "ControlCommand",
    "Controller",
    "ControllerInput",
    "Mode",
    "Path",
    "PathFrame",
    "PolicyTable",
    "Pose",
    "PurePursuitController",
    "RobotLimits",
    "RunConfig",
    "RunMetrics",
    "RunResult",
    "SafeSet",
    "ScriptedTracker",
    "SimplexController",
    "SweepConfig",
    "SweepRecords",
    "UnsafeTracker",
    "__version__",
    "benchmark",
    "build_safe_set",
    "decide",
    "export_report",
    "generate_random_path",
    "load_safe_set",
    "project",
    "run_sweep",
    "save_safe_set",
    "simulate_run",
    "step",
]
