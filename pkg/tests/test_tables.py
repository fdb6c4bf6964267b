"""Tests for simplextrack tables module."""

import pandas as pd

from simplextrack.schemas import BenchmarkReport
from simplextrack.tables import (
    REPORT_COLUMNS,
    RUN_COLUMNS,
    create_summary_table,
    export_report_workbook,
    export_to_csv,
    report_rows_frame,
    run_rows_frame,
)


def test_report_rows_frame_empty():
    """An empty report still has the column header."""
    df = report_rows_frame(BenchmarkReport())
    assert df.empty
    assert list(df.columns) == REPORT_COLUMNS


def test_report_rows_frame_with_data(sample_report):
    df = report_rows_frame(sample_report)
    assert len(df) == 2
    assert df["controller"].iloc[1] == "simplex-unsafe"
    assert df["switches_to_ha"].iloc[1] == 1.5
    assert "completion_rate" not in df.columns


def test_run_rows_frame(sample_report):
    df = run_rows_frame(sample_report)
    assert list(df.columns) == RUN_COLUMNS
    assert len(df) == 4
    assert df["aborted"].tolist() == [False, False, False, True]
    assert run_rows_frame(BenchmarkReport()).empty


def test_create_summary_table(sample_report):
    """Test summary of a report with a safe set."""
    summary = create_summary_table(sample_report)
    values = dict(zip(summary["metric"], summary["value"], strict=True))
    assert values["configurations"] == 2
    assert values["runs"] == 4
    assert values["aborted_runs"] == 1
    assert values["worst_max_d"] == 12.0
    assert values["dwell_time"] == 12.45


def test_create_summary_table_empty():
    summary = create_summary_table(BenchmarkReport())
    assert list(summary["metric"]) == ["configurations", "runs", "aborted_runs", "worst_max_d"]
    assert summary["value"].sum() == 0


def test_export_to_csv_round_trip(sample_report, tmp_path):
    """Floats survive a CSV round trip unchanged."""
    df = report_rows_frame(sample_report)
    df.loc[0, "mean_d"] = 0.1 + 0.2
    target = tmp_path / "report.csv"
    export_to_csv(df, target)
    loaded = pd.read_csv(target, float_precision="round_trip")
    assert loaded["mean_d"].iloc[0] == 0.1 + 0.2


def test_export_report_workbook(sample_report, tmp_path):
    target = tmp_path / "report.xlsx"
    export_report_workbook(sample_report, target)
    sheets = pd.read_excel(target, sheet_name=None)
    assert set(sheets) == {"summary", "runs", "overview"}
    assert len(sheets["runs"]) == 4
