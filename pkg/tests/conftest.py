"""Test data fixtures and golden test cases."""

import json
from pathlib import Path

import pytest

from simplextrack.reachability import SafeSet, SweepRecords, build_safe_set, run_sweep
from simplextrack.schemas import (
    AxisRange,
    BenchmarkReport,
    ReportRow,
    RunMetrics,
    RunSummary,
    SafeSetSummary,
    SweepConfig,
)

GOLDEN_CASES_DIR = Path(__file__).parent / "golden_cases"


def get_golden_case(case_name: str) -> dict:
    """Load a golden test case from JSON file."""
    case_file = GOLDEN_CASES_DIR / f"{case_name}.json"
    with open(case_file) as f:
        return json.load(f)


# Reduced sweep: full d0 resolution, coarse heading and rp, six paths.
SMALL_SWEEP = SweepConfig(
    d0_range=AxisRange(lo=-1.0, hi=1.0, step=0.1),
    theta0_range=AxisRange(lo=-1.5, hi=1.5, step=0.1),
    rp_range=AxisRange(lo=0.0, hi=0.4, step=0.2),
    n_paths=6,
)

# Tiny sweep for file round trips and CLI tests.
TINY_SWEEP = SweepConfig(
    d0_range=AxisRange(lo=-0.4, hi=0.4, step=0.2),
    theta0_range=AxisRange(lo=-0.4, hi=0.4, step=0.2),
    rp_range=AxisRange(lo=0.0, hi=0.2, step=0.2),
    horizon=10.0,
    n_paths=2,
)


@pytest.fixture(scope="session")
def small_records() -> SweepRecords:
    return run_sweep(SMALL_SWEEP)


@pytest.fixture(scope="session")
def safe_set(small_records: SweepRecords) -> SafeSet:
    return build_safe_set(small_records)


@pytest.fixture(scope="session")
def tiny_records() -> SweepRecords:
    return run_sweep(TINY_SWEEP)


def _summary(controller: str, track: str, index: int, **metrics: object) -> RunSummary:
    values: dict[str, object] = {
        "mean_d": 0.1,
        "max_d": 0.3,
        "mean_v": 0.5,
        "completion": True,
    }
    values.update(metrics)
    return RunSummary(
        controller=controller,
        track=track,
        run_index=index,
        seed=index,
        metrics=RunMetrics.model_validate(values),
    )


@pytest.fixture
def sample_report() -> BenchmarkReport:
    """Hand-built report: two configurations, one aborted run."""
    runs = [
        _summary("pp", "square", 0, mean_d=0.12, max_d=0.5, fraction_time_ha=1.0),
        _summary("pp", "square", 1, mean_d=0.16, max_d=0.55, fraction_time_ha=1.0),
        _summary(
            "simplex-unsafe",
            "square",
            0,
            mean_d=0.2,
            max_d=0.9,
            mean_v=0.6,
            switches_to_ha=3,
            switches_to_hp=2,
            fraction_time_ha=0.4,
        ),
        _summary(
            "simplex-unsafe",
            "square",
            1,
            mean_d=0.4,
            max_d=12.0,
            completion=False,
            aborted=True,
            diagnostic="runaway: |d|=12.00 m at t=30.00 s",
        ),
    ]
    rows = [
        ReportRow(
            controller="pp",
            track="square",
            mean_d=0.14,
            max_d=0.55,
            mean_v=0.5,
            switches_to_ha=0.0,
            fraction_time_ha=1.0,
            n_runs=2,
        ),
        ReportRow(
            controller="simplex-unsafe",
            track="square",
            mean_d=0.3,
            max_d=12.0,
            mean_v=0.55,
            switches_to_ha=1.5,
            fraction_time_ha=0.2,
            n_runs=2,
            completion_rate=0.5,
        ),
    ]
    return BenchmarkReport(
        rows=rows,
        runs=runs,
        safe_set=SafeSetSummary(
            set_max_d=0.68, shrunk_max_d=0.63, dwell_time=12.45, n_cells=400, n_shrunk_cells=200
        ),
    )
