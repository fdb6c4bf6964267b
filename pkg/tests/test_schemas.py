"""Tests for simplextrack schemas."""

import pytest
from pydantic import ValidationError

from simplextrack.schemas import (
    AppConfig,
    AxisRange,
    BenchmarkSuite,
    PurePursuitParams,
    RobotLimits,
    RunMetrics,
    SweepConfig,
)
from simplextrack.settings import Settings


def test_robot_limit_defaults():
    limits = RobotLimits()
    assert (limits.v_max, limits.omega_max, limits.control_period) == (1.0, 0.5, 0.05)
    assert limits.motion_bound == pytest.approx(0.05)
    assert limits.rotation_bound == pytest.approx(0.025)


def test_robot_limits_must_be_positive():
    with pytest.raises(ValidationError):
        RobotLimits(v_max=0.0)


def test_axis_range():
    axis = AxisRange(lo=-1.0, hi=1.0, step=0.1)
    assert axis.count == 21
    assert axis.values()[10] == pytest.approx(0.0)
    assert axis.index_of(0.04) == 10
    assert axis.index_of(0.06) == 11
    assert axis.index_of(1.2) is None
    assert axis.index_of(float("nan")) is None


@pytest.mark.parametrize(
    "values", [{"lo": 1.0, "hi": 0.0, "step": 0.1}, {"lo": 0.0, "hi": 1.0, "step": 0.0}]
)
def test_axis_range_invalid(values):
    with pytest.raises(ValidationError):
        AxisRange(**values)


def test_sweep_defaults():
    """The default grid is 21 x 63 x 9 states over 100 paths."""
    config = SweepConfig()
    assert config.d0_range.count == 21
    assert config.theta0_range.count == 63
    assert config.rp_range.count == 9
    assert config.n_records == 1_190_700
    assert config.n_steps == 300
    assert config.hold_steps == 30


def test_sweep_quick_preset():
    config = SweepConfig.quick(n_paths=3)
    assert config.d0_range.count == 11
    assert config.theta0_range.count == 16
    assert config.rp_range.count == 5
    assert config.n_paths == 3


@pytest.mark.parametrize(
    "overrides",
    [
        {"rp_range": AxisRange(lo=-0.1, hi=0.2, step=0.1)},
        {"rp_range": AxisRange(lo=0.0, hi=1.0, step=0.1)},
        {"conv_hold": 15.0},
        {"step_size": 0.07},
        {"n_paths": 0},
    ],
)
def test_sweep_config_invalid(overrides):
    with pytest.raises(ValidationError):
        SweepConfig(**overrides)


def test_app_config_forbids_unknown_keys():
    with pytest.raises(ValidationError):
        AppConfig.model_validate({"safety_margin": 1.0})


def test_app_config_checks_speeds_against_limits():
    with pytest.raises(ValidationError):
        AppConfig(pure_pursuit=PurePursuitParams(v_cmd=1.5))


def test_app_config_file_round_trip(tmp_path):
    config = AppConfig(safety_bound=0.8, bench=BenchmarkSuite(n_runs=5, tracks=("cosine",)))
    target = tmp_path / "config.json"
    target.write_text(config.to_json())
    assert AppConfig.from_file(target) == config


def test_benchmark_suite_configs():
    configs = BenchmarkSuite().configs()
    assert len(configs) == 10
    assert (configs[0].controller, configs[0].track) == ("pp", "square")
    assert (configs[-1].controller, configs[-1].track) == ("simplex-unsafe", "cosine")
    assert all(config.n_runs == 30 for config in configs)


def test_run_metrics_mean_not_above_max():
    with pytest.raises(ValidationError):
        RunMetrics(mean_d=0.5, max_d=0.4, mean_v=0.5, completion=True)


def test_run_metrics_fraction_bounds():
    with pytest.raises(ValidationError):
        RunMetrics(mean_d=0.1, max_d=0.4, mean_v=0.5, completion=True, fraction_time_ha=1.5)


def test_settings_from_environment(monkeypatch):
    monkeypatch.setenv("SIMPLEXTRACK_WORKERS", "4")
    monkeypatch.setenv("SIMPLEXTRACK_LOG_LEVEL", "DEBUG")
    settings = Settings()
    assert settings.workers == 4
    assert settings.log_level == "DEBUG"
    assert settings.config is None


def test_global_seed_fills_unset_section_seeds():
    config = AppConfig(seed=7)
    assert config.sweep_config().path_seed == 7
    assert config.bench_suite().seed == 7
    assert all(run.seed == 7 for run in config.bench_suite().configs())


def test_section_seeds_win_over_global_seed():
    config = AppConfig.model_validate(
        {"seed": 7, "sweep": {"path_seed": 2}, "bench": {"seed": 11}}
    )
    assert config.sweep_config().path_seed == 2
    assert config.bench_suite().seed == 11
