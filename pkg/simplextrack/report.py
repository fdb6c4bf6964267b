"""PDF report generation module.

Generates a benchmark report with:
- Run metadata header
- Per-configuration tracking results
- Safe-set summary
- Measured values next to published reference values
"""

from __future__ import annotations

from datetime import datetime
from pathlib import Path

from reportlab.lib import colors
from reportlab.lib.pagesizes import letter
from reportlab.lib.styles import ParagraphStyle, getSampleStyleSheet
from reportlab.lib.units import inch
from reportlab.platypus import Paragraph, SimpleDocTemplate, Spacer, Table, TableStyle

from simplextrack.harness import REFERENCE_SAFE_SET, REFERENCE_VALUES
from simplextrack.schemas import BenchmarkReport, SafeSetSummary

HEADER_STYLE = [
    ("BACKGROUND", (0, 0), (-1, 0), colors.Color(0.15, 0.25, 0.45)),
    ("TEXTCOLOR", (0, 0), (-1, 0), colors.white),
    ("FONTNAME", (0, 0), (-1, 0), "Helvetica-Bold"),
    ("FONTSIZE", (0, 0), (-1, -1), 8),
    ("GRID", (0, 0), (-1, -1), 0.5, colors.grey),
    ("BACKGROUND", (0, 1), (-1, -1), colors.Color(0.97, 0.97, 0.97)),
    ("TOPPADDING", (0, 0), (-1, -1), 3),
    ("BOTTOMPADDING", (0, 0), (-1, -1), 3),
]


def draw_pdf(
    output_path: Path,
    report: BenchmarkReport,
    run_meta: dict[str, str] | None = None,
) -> None:
    """Generate a PDF report for a benchmark."""
    doc = SimpleDocTemplate(
        str(output_path),
        pagesize=letter,
        topMargin=0.6 * inch,
        bottomMargin=0.6 * inch,
    )
    styles = getSampleStyleSheet()
    story = []

    # ── Title & Run Metadata ─────────────────────────────────────────
    story.append(Paragraph("Path Tracking Benchmark Report", styles["Title"]))
    for key, value in (run_meta or {}).items():
        story.append(Paragraph(f"<b>{key}:</b> {value}", styles["Normal"]))
    story.append(
        Paragraph(
            f"<b>Date:</b> {datetime.now().strftime('%B %d, %Y at %I:%M %p')}",
            styles["Normal"],
        )
    )
    story.append(Spacer(1, 0.25 * inch))

    # ── Results ──────────────────────────────────────────────────────
    story.extend(_results_section(report, styles))

    # ── Safe Set ─────────────────────────────────────────────────────
    if report.safe_set is not None:
        story.extend(_safe_set_section(report.safe_set, styles))

    # ── Reference Comparison ─────────────────────────────────────────
    story.extend(_reference_section(report, styles))

    # ── Footer Disclaimer ────────────────────────────────────────────
    story.append(Spacer(1, 0.3 * inch))
    disclaimer_style = ParagraphStyle(
        "Disclaimer",
        parent=styles["Normal"],
        fontSize=7,
        textColor=colors.grey,
        leading=9,
    )
    story.append(Paragraph(
        "Values come from a kinematic unicycle simulation with idealized "
        "actuation. Reference values were measured with a physics simulator "
        "and trained policies; compare trends, not digits.",
        disclaimer_style,
    ))

    doc.build(story)


def _results_section(report: BenchmarkReport, styles: dict[str, ParagraphStyle]) -> list:
    story: list = []
    story.append(Paragraph("<b>Tracking Results</b>", styles["Heading2"]))
    if not report.rows:
        story.append(Paragraph("No configurations were run.", styles["Normal"]))
        return story

    rows = [["Controller", "Track", "mean d [m]", "max d [m]", "mean v [m/s]",
             "to HA", "time in HA", "runs"]]
    for row in report.rows:
        rows.append([
            row.controller,
            row.track,
            f"{row.mean_d:.3f}",
            f"{row.max_d:.3f}",
            f"{row.mean_v:.3f}",
            f"{row.switches_to_ha:.1f}",
            f"{row.fraction_time_ha * 100:.0f}%",
            str(row.n_runs),
        ])

    table = Table(rows, repeatRows=1)
    table.setStyle(TableStyle(HEADER_STYLE))
    story.append(table)
    story.append(Spacer(1, 0.2 * inch))

    aborted = [run for run in report.runs if run.metrics.aborted]
    if aborted:
        story.append(Paragraph("<b>Aborted Runs</b>", styles["Heading3"]))
        for run in aborted:
            story.append(Paragraph(
                f"- {run.controller} on {run.track}, seed {run.seed}: {run.metrics.diagnostic}",
                styles["Normal"],
            ))
        story.append(Spacer(1, 0.1 * inch))
    return story


def _safe_set_section(summary: SafeSetSummary, styles: dict[str, ParagraphStyle]) -> list:
    story: list = []
    story.append(Paragraph("<b>Safe Set</b>", styles["Heading2"]))

    rows = [
        ["Quantity", "Measured", "Reference"],
        ["Max deviation in set", f"{summary.set_max_d:.3f} m",
         f"{REFERENCE_SAFE_SET['set_max_d']:.3f} m"],
        ["Max deviation in shrunk set", f"{summary.shrunk_max_d:.3f} m",
         f"{REFERENCE_SAFE_SET['shrunk_max_d']:.3f} m"],
        ["Dwell time", f"{summary.dwell_time:.2f} s",
         f"{REFERENCE_SAFE_SET['dwell_time']:.2f} s"],
        ["Cells (set / shrunk)", f"{summary.n_cells} / {summary.n_shrunk_cells}", ""],
    ]
    table = Table(rows, colWidths=[2.5 * inch, 1.5 * inch, 1.5 * inch])
    table.setStyle(TableStyle(HEADER_STYLE))
    story.append(table)
    story.append(Spacer(1, 0.2 * inch))
    return story


def _reference_section(report: BenchmarkReport, styles: dict[str, ParagraphStyle]) -> list:
    story: list = []
    matched = [
        (row, REFERENCE_VALUES[(row.controller, row.track)])
        for row in report.rows
        if (row.controller, row.track) in REFERENCE_VALUES
    ]
    if not matched:
        return story

    story.append(Paragraph("<b>Reference Comparison</b>", styles["Heading2"]))
    rows = [["Controller", "Track", "mean d", "ref", "max d", "ref", "mean v", "ref"]]
    for row, (ref_mean_d, ref_max_d, ref_mean_v) in matched:
        rows.append([
            row.controller,
            row.track,
            f"{row.mean_d:.3f}",
            f"{ref_mean_d:.3f}",
            f"{row.max_d:.3f}",
            f"{ref_max_d:.3f}",
            f"{row.mean_v:.3f}",
            f"{ref_mean_v:.3f}",
        ])
    table = Table(rows, repeatRows=1)
    table.setStyle(TableStyle(HEADER_STYLE))
    story.append(table)
    story.append(Spacer(1, 0.2 * inch))
    return story


__all__ = ["draw_pdf"]
