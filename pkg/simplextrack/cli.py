"""CLI interface for simplextrack."""

from __future__ import annotations

import json
import logging
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import click
from pydantic import BaseModel, ValidationError

from simplextrack import __version__
from simplextrack.harness import (
    SimulationError,
    benchmark,
    export_report,
    make_controller,
    make_track,
    reference_frame,
    simulate_run,
)
from simplextrack.reachability import (
    DATA_DIR,
    REFERENCE_SAFE_SET_FILE,
    REFERENCE_SUMMARY_FILE,
    REFERENCE_SWEEP_FILE,
    SafeSet,
    SafeSetError,
    SweepError,
    SweepRecords,
    build_safe_set,
    contour_frame,
    load_safe_set,
    reference_sweep_config,
    run_sweep,
    save_safe_set,
    sweep_summary,
)
from simplextrack.schemas import AppConfig, RunConfig, SweepConfig
from simplextrack.settings import get_settings
from simplextrack.simplex import SimplexController
from simplextrack.tables import export_to_csv

UTC = timezone.utc

logger = logging.getLogger(__name__)

CONTROLLER_IDS = [
    "pp",
    "scripted",
    "unsafe",
    "policy",
    "simplex-scripted",
    "simplex-unsafe",
    "simplex-policy",
]
TRACK_IDS = ["square", "cosine"]
STRATEGIES = ["instantaneous", "predictive"]
QUICK_N_RUNS = 10

SWEEP_RECORDS_FILE = "sweep_records.csv"
SWEEP_CONFIG_FILE = "sweep_config.json"
SWEEP_SUMMARY_FILE = "sweep_summary.json"


# ── helpers ──────────────────────────────────────────────────────────
def _validation_message(exc: ValidationError) -> str:
    parts = []
    for error in exc.errors():
        loc = ".".join(str(part) for part in error["loc"]) or exc.title
        parts.append(f"{loc}: {error['msg']}")
    return "invalid configuration: " + "; ".join(parts)


def _revalidate(model: BaseModel, **overrides: Any) -> Any:
    """Apply *overrides* to a frozen model and validate the result."""
    values = model.model_dump()
    values.update({key: value for key, value in overrides.items() if value is not None})
    try:
        return type(model).model_validate(values)
    except ValidationError as exc:
        raise click.ClickException(_validation_message(exc)) from exc


def _load_config(ctx: click.Context) -> AppConfig:
    path: Path | None = ctx.obj["config"]
    if path is None:
        return AppConfig()
    try:
        return AppConfig.from_file(path)
    except ValidationError as exc:
        raise click.ClickException(f"{path}: {_validation_message(exc)}") from exc
    except OSError as exc:
        raise click.ClickException(f"cannot read config {path}: {exc}") from exc


def _output_dir(option: str | None, config: AppConfig) -> Path:
    if option:
        target = Path(option)
    elif "output_dir" in config.model_fields_set:
        target = config.output_dir
    else:
        target = get_settings().output_dir
    try:
        target.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise click.ClickException(f"cannot create output directory {target}: {exc}") from exc
    return target


def _load_sweep_config(records_file: Path, option: str | None, config: AppConfig) -> SweepConfig:
    sidecar = Path(option) if option else records_file.parent / SWEEP_CONFIG_FILE
    if not sidecar.exists():
        return config.sweep_config()
    try:
        return SweepConfig.model_validate_json(sidecar.read_text())
    except ValidationError as exc:
        raise click.ClickException(f"{sidecar}: {_validation_message(exc)}") from exc


def _load_records(records_file: Path, sweep: SweepConfig) -> SweepRecords:
    try:
        return SweepRecords.from_csv(records_file, sweep)
    except (SweepError, ValueError) as exc:
        raise click.ClickException(f"{records_file}: {exc}") from exc


def _resolve_safe_set(option: str | None, config: AppConfig) -> SafeSet | None:
    path = Path(option) if option else config.safe_set_path
    if path is None:
        return None
    try:
        return load_safe_set(path)
    except (SafeSetError, OSError) as exc:
        raise click.ClickException(f"cannot load safe set {path}: {exc}") from exc


def _echo_json(data: Any) -> None:
    click.echo(json.dumps(data, indent=2))


def _write_json(path: Path, data: Any) -> None:
    try:
        path.write_text(json.dumps(data, indent=2) + "\n")
    except OSError as exc:
        raise click.ClickException(f"cannot write {path}: {exc}") from exc


# ── commands ─────────────────────────────────────────────────────────
@click.group()
@click.version_option(version=__version__)
@click.option(
    "--config",
    type=click.Path(exists=True, dir_okay=False, path_type=Path),
    help="JSON config file (default: $SIMPLEXTRACK_CONFIG)",
)
@click.option(
    "--log-level",
    type=click.Choice(["DEBUG", "INFO", "WARNING", "ERROR"], case_sensitive=False),
    help="Logging level (default: $SIMPLEXTRACK_LOG_LEVEL or WARNING)",
)
@click.pass_context
def main(ctx: click.Context, config: Path | None, log_level: str | None) -> None:
    """Simplextrack - Simplex-architecture path tracking experiments."""
    settings = get_settings()
    logging.basicConfig(
        level=(log_level or settings.log_level).upper(),
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    ctx.ensure_object(dict)
    ctx.obj["config"] = config or settings.config
    ctx.obj["workers"] = settings.workers


def _workers(ctx: click.Context, option: int | None) -> int:
    return option if option is not None else ctx.obj["workers"]


@main.command()
@click.option("--quick", is_flag=True, help="Coarse grid (0.2 m x 0.2 rad x 0.1 m) over 10 paths")
@click.option("--step-size", type=float, help="Integration step in seconds [0.05]")
@click.option("--horizon", type=float, help="Simulated seconds per record [15]")
@click.option("--n-paths", type=int, help="Number of random paths [100]")
@click.option("--path-seed", type=int, help="Seed of the random path family [0]")
@click.option("--workers", type=int, help="Worker processes")
@click.option("--output", type=click.Path(file_okay=False), help="Output directory")
@click.pass_context
def sweep(
    ctx: click.Context,
    quick: bool,
    step_size: float | None,
    horizon: float | None,
    n_paths: int | None,
    path_seed: int | None,
    workers: int | None,
    output: str | None,
) -> None:
    """Simulate pure pursuit from every grid state on every random path."""
    config = _load_config(ctx)
    base = SweepConfig.quick() if quick else config.sweep_config()
    if path_seed is None:
        path_seed = config.sweep_config().path_seed
    sweep_config: SweepConfig = _revalidate(
        base, step_size=step_size, horizon=horizon, n_paths=n_paths, path_seed=path_seed
    )
    out = _output_dir(output, config)

    try:
        records = run_sweep(
            sweep_config,
            limits=config.limits,
            workers=_workers(ctx, workers),
        )
    except SweepError as exc:
        raise click.ClickException(f"sweep failed: {exc}") from exc

    summary = sweep_summary(records)
    try:
        records.to_csv(out / SWEEP_RECORDS_FILE)
        (out / SWEEP_CONFIG_FILE).write_text(sweep_config.model_dump_json(indent=2) + "\n")
    except OSError as exc:
        raise click.ClickException(f"cannot write sweep results to {out}: {exc}") from exc
    _write_json(out / SWEEP_SUMMARY_FILE, summary)

    _echo_json({key: value for key, value in summary.items() if key != "non_converging_cells"})
    click.echo(f"Records saved to {out / SWEEP_RECORDS_FILE}")


@main.command("build-set")
@click.argument("records_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--sweep-config",
    type=click.Path(exists=True, dir_okay=False),
    help="Sweep config JSON (default: sweep_config.json next to the records)",
)
@click.option("--safety-bound", type=float, help="Corridor half-width in meters [1.0]")
@click.option("--output", type=click.Path(dir_okay=False), help="Safe-set file path")
@click.pass_context
def build_set(
    ctx: click.Context,
    records_file: Path,
    sweep_config: str | None,
    safety_bound: float | None,
    output: str | None,
) -> None:
    """Build the convex safe set and its shrunk variant from sweep records."""
    config = _load_config(ctx)
    sweep = _load_sweep_config(records_file, sweep_config, config)
    records = _load_records(records_file, sweep)

    try:
        safe_set = build_safe_set(
            records,
            safety_bound=safety_bound if safety_bound is not None else config.safety_bound,
            limits=config.limits,
            heading_margin=config.heading_margin,
        )
    except SafeSetError as exc:
        raise click.ClickException(f"cannot build safe set: {exc}") from exc

    target = Path(output) if output else _output_dir(None, config) / "safe_set.csv"
    try:
        save_safe_set(safe_set, target)
    except OSError as exc:
        raise click.ClickException(f"cannot write {target}: {exc}") from exc

    _echo_json(safe_set.summary().model_dump())
    click.echo(f"Safe set saved to {target}")


@main.command("build-reference")
@click.option("--workers", type=int, help="Worker processes")
@click.option(
    "--output",
    type=click.Path(file_okay=False, path_type=Path),
    help="Target directory (default: the package data directory)",
)
@click.pass_context
def build_reference(ctx: click.Context, workers: int | None, output: Path | None) -> None:
    """Regenerate the shipped reference safe set from the default sweep."""
    sweep = reference_sweep_config()
    defaults = AppConfig()
    out = output or DATA_DIR
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise click.ClickException(f"cannot create {out}: {exc}") from exc
    try:
        records = run_sweep(sweep, limits=defaults.limits, workers=_workers(ctx, workers))
        safe_set = build_safe_set(
            records,
            safety_bound=defaults.safety_bound,
            limits=defaults.limits,
            heading_margin=defaults.heading_margin,
        )
    except (SweepError, SafeSetError) as exc:
        raise click.ClickException(f"cannot build reference safe set: {exc}") from exc

    try:
        save_safe_set(safe_set, out / REFERENCE_SAFE_SET_FILE.name)
        (out / REFERENCE_SWEEP_FILE.name).write_text(sweep.model_dump_json(indent=2) + "\n")
    except OSError as exc:
        raise click.ClickException(f"cannot write reference files to {out}: {exc}") from exc
    _write_json(out / REFERENCE_SUMMARY_FILE.name, sweep_summary(records))

    _echo_json(safe_set.summary().model_dump())
    click.echo(f"Reference safe set saved to {out / REFERENCE_SAFE_SET_FILE.name}")


@main.command()
@click.option("--controller", type=click.Choice(CONTROLLER_IDS), required=True)
@click.option("--track", type=click.Choice(TRACK_IDS), required=True)
@click.option("--seed", type=int, help="Seed of the start offset [bench seed]")
@click.option("--d0", type=float, help="Fixed lateral start offset in meters")
@click.option("--theta0", type=float, help="Fixed heading start offset in rad")
@click.option("--strategy", type=click.Choice(STRATEGIES), help="Decision strategy")
@click.option("--max-sim-time", type=float, help="Upper bound on simulated seconds [300]")
@click.option("--safe-set", type=click.Path(exists=True, dir_okay=False), help="Safe-set file")
@click.option("--output", type=click.Path(file_okay=False), help="Output directory")
@click.pass_context
def run(
    ctx: click.Context,
    controller: str,
    track: str,
    seed: int | None,
    d0: float | None,
    theta0: float | None,
    strategy: str | None,
    max_sim_time: float | None,
    safe_set: str | None,
    output: str | None,
) -> None:
    """Simulate one closed-loop run and write its trajectory and metrics."""
    config = _load_config(ctx)
    if seed is None:
        seed = config.bench_suite().seed
    perturbation = _revalidate(config.bench.perturbation, d0=d0, theta0=theta0)
    run_config: RunConfig = _revalidate(
        RunConfig(controller=controller, track=track),  # type: ignore[arg-type]
        n_runs=1,
        seed=seed,
        max_sim_time=max_sim_time or config.bench.max_sim_time,
        strategy=strategy or config.bench.strategy,
        perturbation=perturbation.model_dump(),
    )
    out = _output_dir(output, config)

    try:
        ctrl = make_controller(
            controller, config, _resolve_safe_set(safe_set, config), run_config.strategy
        )
        path = make_track(track, config.tracks)
        result = simulate_run(ctrl, path, run_config, seed, config.limits)
    except SimulationError as exc:
        raise click.ClickException(str(exc)) from exc

    stem = f"{controller}_{track}_{seed}"
    try:
        result.trajectory_frame().to_csv(
            out / f"{stem}_trajectory.csv", index=False, float_format="%.17g"
        )
        if isinstance(ctrl, SimplexController):
            result.write_mode_trace(out / f"{stem}_modes.csv")
    except OSError as exc:
        raise click.ClickException(f"cannot write run output to {out}: {exc}") from exc
    metrics = result.metrics.model_dump()
    _write_json(out / f"{stem}_metrics.json", metrics)
    _echo_json(metrics)


@main.command()
@click.option("--quick", is_flag=True, help=f"{QUICK_N_RUNS} runs per configuration")
@click.option("--n-runs", type=int, help="Runs per (controller, track) [30]")
@click.option("--seed", type=int, help="Seed of run 0 [0]")
@click.option(
    "--controller", "controllers", type=click.Choice(CONTROLLER_IDS), multiple=True,
    help="Controllers to compare (repeatable)",
)
@click.option(
    "--track", "tracks", type=click.Choice(TRACK_IDS), multiple=True,
    help="Tracks (repeatable)",
)
@click.option("--strategy", type=click.Choice(STRATEGIES), help="Decision strategy")
@click.option("--safe-set", type=click.Path(exists=True, dir_okay=False), help="Safe-set file")
@click.option("--workers", type=int, help="Worker processes")
@click.option("--pdf", is_flag=True, help="Also write a PDF report")
@click.option("--xlsx", is_flag=True, help="Also write an Excel workbook")
@click.option("--output", type=click.Path(file_okay=False), help="Output directory")
@click.pass_context
def bench(
    ctx: click.Context,
    quick: bool,
    n_runs: int | None,
    seed: int | None,
    controllers: tuple[str, ...],
    tracks: tuple[str, ...],
    strategy: str | None,
    safe_set: str | None,
    workers: int | None,
    pdf: bool,
    xlsx: bool,
    output: str | None,
) -> None:
    """Run the controller comparison and write report tables."""
    config = _load_config(ctx)
    if quick and n_runs is None:
        n_runs = QUICK_N_RUNS
    suite = _revalidate(
        config.bench_suite(),
        n_runs=n_runs,
        seed=seed,
        strategy=strategy,
        controllers=controllers or None,
        tracks=tracks or None,
    )
    configs = suite.configs()
    safe = _resolve_safe_set(safe_set, config)
    if safe is None and any(c.controller.startswith("simplex-") for c in configs):
        raise click.ClickException(
            "simplex controllers need a safe set: pass --safe-set or set safe_set_path"
        )
    out = _output_dir(output, config)

    try:
        report = benchmark(configs, config, safe, workers=_workers(ctx, workers))
    except SimulationError as exc:
        raise click.ClickException(str(exc)) from exc

    try:
        export_report(report, out / "report.csv", "csv")
        export_report(report, out / "runs.csv", "runs-csv")
        export_report(report, out / "report.json", "json")
        export_to_csv(reference_frame(report), out / "reference.csv")
        if xlsx:
            export_report(report, out / "report.xlsx", "xlsx")
        if pdf:
            export_report(report, out / "report.pdf", "pdf")
    except OSError as exc:
        raise click.ClickException(f"cannot write report to {out}: {exc}") from exc
    _write_json(
        out / "meta.json",
        {
            "version": __version__,
            "created": datetime.now(UTC).isoformat(timespec="seconds"),
            "config": str(ctx.obj["config"]) if ctx.obj["config"] else None,
            "n_configurations": len(configs),
            "n_runs": suite.n_runs,
        },
    )

    _echo_json([row.model_dump() for row in report.rows])
    click.echo(f"Report saved to {out / 'report.csv'}")


@main.command("export-contour")
@click.argument("records_file", type=click.Path(exists=True, dir_okay=False, path_type=Path))
@click.option(
    "--sweep-config",
    type=click.Path(exists=True, dir_okay=False),
    help="Sweep config JSON (default: sweep_config.json next to the records)",
)
@click.option("--safe-set", type=click.Path(exists=True, dir_okay=False), help="Safe-set file")
@click.option("--rp", type=float, help="Restrict to one start position along the first segment")
@click.option("--output", type=click.Path(dir_okay=False), help="Contour CSV path")
@click.pass_context
def export_contour(
    ctx: click.Context,
    records_file: Path,
    sweep_config: str | None,
    safe_set: str | None,
    rp: float | None,
    output: str | None,
) -> None:
    """Export worst deviation and convergence time per (d0, theta0) cell."""
    config = _load_config(ctx)
    sweep = _load_sweep_config(records_file, sweep_config, config)
    records = _load_records(records_file, sweep)
    if rp is not None and sweep.rp_range.index_of(rp) is None:
        raise click.BadParameter(f"{rp} is not on the rp grid", param_hint="--rp")

    frame = contour_frame(records, _resolve_safe_set(safe_set, config), rp=rp)
    target = Path(output) if output else _output_dir(None, config) / "contour.csv"
    try:
        frame.to_csv(target, index=False, float_format="%.17g")
    except OSError as exc:
        raise click.ClickException(f"cannot write {target}: {exc}") from exc
    click.echo(f"Contour data saved to {target} ({len(frame)} cells)")


if __name__ == "__main__":
    main()
