"""Pandas-based data tables for benchmark reports."""

from pathlib import Path

import pandas as pd

from simplextrack.schemas import BenchmarkReport

REPORT_COLUMNS = [
    "controller",
    "track",
    "mean_d",
    "max_d",
    "mean_v",
    "switches_to_ha",
    "fraction_time_ha",
    "n_runs",
]

RUN_COLUMNS = [
    "controller",
    "track",
    "run_index",
    "seed",
    "mean_d",
    "max_d",
    "mean_v",
    "completion",
    "switches_to_ha",
    "switches_to_hp",
    "fraction_time_ha",
    "duration",
    "aborted",
]


def report_rows_frame(report: BenchmarkReport) -> pd.DataFrame:
    """
    Create the per-configuration table of a benchmark.

    Args:
        report: Benchmark report

    Returns:
        DataFrame with one row per (controller, track); an empty report
        still carries the column header
    """
    return pd.DataFrame(
        [row.model_dump(include=set(REPORT_COLUMNS)) for row in report.rows],
        columns=REPORT_COLUMNS,
    )


def run_rows_frame(report: BenchmarkReport) -> pd.DataFrame:
    """
    Create the per-run table of a benchmark.

    Args:
        report: Benchmark report

    Returns:
        DataFrame with one row per simulated run
    """
    records = [
        {
            "controller": run.controller,
            "track": run.track,
            "run_index": run.run_index,
            "seed": run.seed,
            **run.metrics.model_dump(exclude={"diagnostic"}),
        }
        for run in report.runs
    ]
    return pd.DataFrame(records, columns=RUN_COLUMNS)


def create_summary_table(report: BenchmarkReport) -> pd.DataFrame:
    """Headline numbers of a report as a two-column metric/value table."""
    runs = run_rows_frame(report)
    metrics = ["configurations", "runs", "aborted_runs", "worst_max_d"]
    values: list[float] = [
        len(report.rows),
        len(runs),
        int(runs["aborted"].sum()) if not runs.empty else 0,
        float(runs["max_d"].max()) if not runs.empty else 0.0,
    ]
    if report.safe_set is not None:
        metrics += ["set_max_d", "shrunk_max_d", "dwell_time"]
        values += [
            report.safe_set.set_max_d,
            report.safe_set.shrunk_max_d,
            report.safe_set.dwell_time,
        ]
    return pd.DataFrame({"metric": metrics, "value": values})


def export_to_csv(df: pd.DataFrame, filepath: str | Path) -> None:
    """
    Export DataFrame to CSV file.

    Floats are written with 17 significant digits so repeated exports of
    the same report are byte-identical and re-read losslessly.

    Args:
        df: DataFrame to export
        filepath: Path to save CSV file
    """
    df.to_csv(filepath, index=False, float_format="%.17g")


def export_to_excel(sheets: dict[str, pd.DataFrame], filepath: str | Path) -> None:
    """
    Export DataFrames to an Excel workbook, one sheet per entry.

    Args:
        sheets: Sheet name to DataFrame
        filepath: Path to save Excel file
    """
    with pd.ExcelWriter(filepath, engine="openpyxl") as writer:
        for name, df in sheets.items():
            df.to_excel(writer, sheet_name=name, index=False)


def export_report_workbook(report: BenchmarkReport, filepath: str | Path) -> None:
    export_to_excel(
        {
            "summary": report_rows_frame(report),
            "runs": run_rows_frame(report),
            "overview": create_summary_table(report),
        },
        filepath,
    )
