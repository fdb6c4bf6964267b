"""Tests for the simplextrack command-line interface."""

import json

import pandas as pd
import pytest
from click.testing import CliRunner

from simplextrack import __version__
from simplextrack.cli import main
from simplextrack.reachability import load_safe_set
from simplextrack.schemas import AppConfig, BenchmarkSuite, SweepConfig
from simplextrack.settings import get_settings
from simplextrack.tables import REPORT_COLUMNS, RUN_COLUMNS

runner = CliRunner()


@pytest.fixture(scope="module")
def sweep_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("sweep")
    result = runner.invoke(
        main,
        ["sweep", "--quick", "--horizon", "10", "--n-paths", "2", "--output", str(out)],
    )
    assert result.exit_code == 0, result.output
    return out


@pytest.fixture(scope="module")
def safe_set_file(sweep_dir):
    target = sweep_dir / "safe_set.csv"
    result = runner.invoke(
        main, ["build-set", str(sweep_dir / "sweep_records.csv"), "--output", str(target)]
    )
    assert result.exit_code == 0, result.output
    return target


@pytest.fixture
def short_config(tmp_path):
    target = tmp_path / "config.json"
    target.write_text(AppConfig(bench=BenchmarkSuite(max_sim_time=10.0)).to_json())
    return target


def test_version():
    result = runner.invoke(main, ["--version"])
    assert result.exit_code == 0
    assert __version__ in result.output


def test_sweep_outputs(sweep_dir):
    records = pd.read_csv(sweep_dir / "sweep_records.csv")
    assert len(records) == 11 * 16 * 5 * 2
    sidecar = json.loads((sweep_dir / "sweep_config.json").read_text())
    assert sidecar["horizon"] == 10.0
    assert sidecar["n_paths"] == 2
    summary = json.loads((sweep_dir / "sweep_summary.json").read_text())
    assert summary["n_records"] == len(records)


def test_sweep_rejects_invalid_step(tmp_path):
    result = runner.invoke(
        main, ["sweep", "--quick", "--step-size", "0", "--output", str(tmp_path)]
    )
    assert result.exit_code == 1
    assert "invalid configuration" in result.output
    assert "step_size" in result.output


def test_build_set(safe_set_file):
    safe_set = load_safe_set(safe_set_file)
    assert safe_set.set_max_d < 1.0
    assert safe_set.n_shrunk_cells > 0


def test_build_set_rejects_foreign_file(tmp_path):
    bogus = tmp_path / "records.csv"
    bogus.write_text("a,b\n1,2\n")
    result = runner.invoke(main, ["build-set", str(bogus), "--output", str(tmp_path / "s.csv")])
    assert result.exit_code == 1
    assert "lacks columns" in result.output


def test_run_plain_controller(tmp_path):
    result = runner.invoke(
        main,
        [
            "run", "--controller", "pp", "--track", "cosine", "--seed", "3",
            "--max-sim-time", "5", "--output", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    metrics = json.loads((tmp_path / "pp_cosine_3_metrics.json").read_text())
    assert metrics["duration"] == pytest.approx(5.0)
    trajectory = pd.read_csv(tmp_path / "pp_cosine_3_trajectory.csv")
    assert len(trajectory) == 100
    assert not (tmp_path / "pp_cosine_3_modes.csv").exists()


def test_run_simplex_writes_mode_trace(tmp_path, safe_set_file):
    result = runner.invoke(
        main,
        [
            "run", "--controller", "simplex-unsafe", "--track", "square", "--d0", "0.05",
            "--theta0", "0", "--max-sim-time", "10", "--safe-set", str(safe_set_file),
            "--output", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    modes = pd.read_csv(tmp_path / "simplex-unsafe_square_0_modes.csv")
    assert set(modes["mode"]) <= {"PERFORMANCE", "ASSURANCE"}
    trajectory = pd.read_csv(tmp_path / "simplex-unsafe_square_0_trajectory.csv")
    assert trajectory["d_signed"].iloc[0] == pytest.approx(0.05)


def test_run_simplex_without_safe_set(tmp_path):
    result = runner.invoke(
        main,
        ["run", "--controller", "simplex-scripted", "--track", "square", "--output", str(tmp_path)],
    )
    assert result.exit_code == 1
    assert "safe set" in result.output


def test_unknown_controller_is_a_usage_error(tmp_path):
    result = runner.invoke(
        main, ["run", "--controller", "mpc", "--track", "square", "--output", str(tmp_path)]
    )
    assert result.exit_code == 2


def test_bench(tmp_path, short_config):
    result = runner.invoke(
        main,
        [
            "--config", str(short_config), "bench", "--n-runs", "1",
            "--controller", "pp", "--controller", "scripted", "--track", "cosine",
            "--xlsx", "--pdf", "--output", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    report = pd.read_csv(tmp_path / "report.csv")
    assert list(report.columns) == REPORT_COLUMNS
    assert list(report["controller"]) == ["pp", "scripted"]
    runs = pd.read_csv(tmp_path / "runs.csv")
    assert list(runs.columns) == RUN_COLUMNS
    assert len(runs) == 2
    reference = pd.read_csv(tmp_path / "reference.csv")
    assert list(reference["controller"]) == ["pp", "scripted"]
    assert "ref_mean_d" in reference.columns
    assert (tmp_path / "report.xlsx").stat().st_size > 0
    assert (tmp_path / "report.pdf").read_bytes().startswith(b"%PDF")
    meta = json.loads((tmp_path / "meta.json").read_text())
    assert meta["n_configurations"] == 2
    assert meta["config"] == str(short_config)


def test_bench_is_repeatable(tmp_path, short_config):
    args = ["--config", str(short_config), "bench", "--n-runs", "2", "--controller", "scripted"]
    first = runner.invoke(main, [*args, "--output", str(tmp_path / "a")])
    second = runner.invoke(main, [*args, "--output", str(tmp_path / "b")])
    assert first.exit_code == 0 and second.exit_code == 0
    for name in ("report.csv", "runs.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_bench_simplex_needs_safe_set(tmp_path):
    result = runner.invoke(
        main, ["bench", "--quick", "--controller", "simplex-unsafe", "--output", str(tmp_path)]
    )
    assert result.exit_code == 1
    assert "safe set" in result.output


def test_invalid_config_file(tmp_path):
    target = tmp_path / "config.json"
    target.write_text(json.dumps({"safety_bound": -1.0}))
    result = runner.invoke(main, ["--config", str(target), "bench", "--output", str(tmp_path)])
    assert result.exit_code == 1
    assert "safety_bound" in result.output


def test_export_contour(sweep_dir, safe_set_file, tmp_path):
    target = tmp_path / "contour.csv"
    result = runner.invoke(
        main,
        [
            "export-contour", str(sweep_dir / "sweep_records.csv"),
            "--safe-set", str(safe_set_file), "--rp", "0.1", "--output", str(target),
        ],
    )
    assert result.exit_code == 0, result.output
    contour = pd.read_csv(target)
    assert len(contour) == 11 * 16
    assert contour["in_safe_set"].sum() == load_safe_set(safe_set_file).n_cells


def test_export_contour_rejects_off_grid_rp(sweep_dir, tmp_path):
    result = runner.invoke(
        main,
        [
            "export-contour", str(sweep_dir / "sweep_records.csv"), "--rp", "5.0",
            "--output", str(tmp_path / "contour.csv"),
        ],
    )
    assert result.exit_code == 2


def test_run_seed_defaults_to_bench_seed(tmp_path):
    target = tmp_path / "config.json"
    target.write_text(json.dumps({"bench": {"seed": 7}}))
    result = runner.invoke(
        main,
        [
            "--config", str(target), "run", "--controller", "pp", "--track", "cosine",
            "--max-sim-time", "2", "--output", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "pp_cosine_7_metrics.json").exists()


def test_global_seed_sets_path_seed(tmp_path):
    target = tmp_path / "config.json"
    target.write_text(json.dumps({"seed": 3}))
    result = runner.invoke(
        main,
        [
            "--config", str(target), "sweep", "--quick", "--horizon", "2", "--n-paths", "1",
            "--output", str(tmp_path),
        ],
    )
    assert result.exit_code == 0, result.output
    sidecar = json.loads((tmp_path / "sweep_config.json").read_text())
    assert sidecar["path_seed"] == 3


@pytest.fixture
def settings_env(monkeypatch):
    get_settings.cache_clear()
    yield monkeypatch
    get_settings.cache_clear()


def test_output_dir_falls_back_to_settings(tmp_path, settings_env):
    settings_env.setenv("SIMPLEXTRACK_OUTPUT_DIR", str(tmp_path / "from_env"))
    result = runner.invoke(
        main,
        ["run", "--controller", "pp", "--track", "cosine", "--max-sim-time", "2"],
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "from_env" / "pp_cosine_0_metrics.json").exists()


def test_build_reference(tmp_path, monkeypatch):
    reduced = SweepConfig.quick(horizon=10.0, n_paths=2)
    monkeypatch.setattr("simplextrack.cli.reference_sweep_config", lambda: reduced)
    result = runner.invoke(main, ["build-reference", "--output", str(tmp_path)])
    assert result.exit_code == 0, result.output
    safe_set = load_safe_set(tmp_path / "reference_safe_set.csv")
    assert safe_set.set_max_d < 1.0
    sidecar_text = (tmp_path / "reference_sweep_config.json").read_text()
    sidecar = SweepConfig.model_validate_json(sidecar_text)
    assert sidecar == reduced
    summary = json.loads((tmp_path / "reference_sweep_summary.json").read_text())
    assert summary["n_records"] == reduced.n_records
