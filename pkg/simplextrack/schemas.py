"""Pydantic schemas for simplextrack configuration and results.

Every default matches the experimental setup the library reproduces:
robot limits of 1 m/s and 0.5 rad/s at a 0.05 s control period, a pure
pursuit fallback with a 1 m lookahead at 0.5 m/s, and the 21 x 63 x 9
initial-state grid swept over 100 random paths.
"""

from __future__ import annotations

import math
from pathlib import Path
from typing import Literal

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

# Tolerance for grid arithmetic on float steps (0.1, 0.05, ...).
_GRID_EPS = 1e-9

ControllerId = Literal[
    "pp",
    "scripted",
    "unsafe",
    "policy",
    "simplex-scripted",
    "simplex-unsafe",
    "simplex-policy",
]
TrackId = Literal["square", "cosine"]
DecisionStrategy = Literal["instantaneous", "predictive"]

DEFAULT_CONTROLLERS: tuple[ControllerId, ...] = (
    "pp",
    "scripted",
    "unsafe",
    "simplex-scripted",
    "simplex-unsafe",
)
DEFAULT_TRACKS: tuple[TrackId, ...] = ("square", "cosine")


# ── Robot and controllers ────────────────────────────────────────────
class RobotLimits(BaseModel):
    """Physical command limits of the differential-drive robot."""

    model_config = ConfigDict(frozen=True)

    v_max: float = Field(1.0, gt=0, description="Maximum linear velocity in m/s")
    omega_max: float = Field(0.5, gt=0, description="Maximum angular velocity in rad/s")
    control_period: float = Field(0.05, gt=0, description="Control period in seconds")

    @property
    def motion_bound(self) -> float:
        """Largest distance the robot can cover within one control period."""
        return self.v_max * self.control_period

    @property
    def rotation_bound(self) -> float:
        """Largest heading change within one control period."""
        return self.omega_max * self.control_period


class PurePursuitParams(BaseModel):
    """Parameters of the pure-pursuit high-assurance controller."""

    model_config = ConfigDict(frozen=True)

    lookahead: float = Field(1.0, gt=0, description="Lookahead distance L in meters")
    v_cmd: float = Field(0.5, gt=0, description="Constant commanded velocity in m/s")


class TrackerGains(BaseModel):
    """Gains of the scripted heading-plus-cross-track tracker."""

    model_config = ConfigDict(frozen=True)

    heading_gain: float = Field(1.2, gt=0, description="Heading error gain in 1/s")
    cross_track_gain: float = Field(0.4, gt=0, description="Cross-track gain in rad/(m*s)")
    preview: float = Field(1.5, gt=0, description="Preview distance along the path in meters")
    slowdown_gain: float = Field(
        0.6, ge=0, description="Fractional speed reduction per radian of upcoming bend"
    )
    v_min: float = Field(0.3, ge=0, description="Speed floor in bends, m/s")


class UnsafePerturbation(BaseModel):
    """Destabilising perturbation applied on top of the scripted tracker."""

    model_config = ConfigDict(frozen=True)

    bias_amplitude: float = Field(
        0.5, ge=0, description="Amplitude of the oscillating heading bias in radians"
    )
    bias_period: float = Field(25.0, gt=0, description="Period of the heading bias in seconds")
    bias_phase: float = Field(0.0, description="Phase of the heading bias in radians")
    overshoot_gain: float = Field(
        1.6, ge=0, description="Multiplier on the previewed bend (>1 over-rotates in corners)"
    )
    hold_speed: bool = Field(True, description="Keep v_max through bends instead of slowing")


# ── Sweep ────────────────────────────────────────────────────────────
class AxisRange(BaseModel):
    """Closed range ``[lo, hi]`` sampled at ``lo + k * step``."""

    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float
    step: float = Field(..., gt=0)

    @model_validator(mode="after")
    def _check_order(self) -> AxisRange:
        if self.hi < self.lo:
            raise ValueError(f"hi ({self.hi}) must not be below lo ({self.lo})")
        return self

    @property
    def count(self) -> int:
        return int(math.floor((self.hi - self.lo) / self.step + _GRID_EPS)) + 1

    def values(self) -> list[float]:
        return [self.lo + k * self.step for k in range(self.count)]

    def index_of(self, value: float) -> int | None:
        """Nearest grid index of *value*, or ``None`` outside the sampled box."""
        if not math.isfinite(value):
            return None
        k = round((value - self.lo) / self.step)
        return k if 0 <= k < self.count else None


class SweepConfig(BaseModel):
    """Initial-state grid and closed-loop settings of the reachability sweep."""

    model_config = ConfigDict(frozen=True)

    d0_range: AxisRange = AxisRange(lo=-1.0, hi=1.0, step=0.1)
    theta0_range: AxisRange = AxisRange(lo=-1.5708, hi=1.5708, step=0.05)
    rp_range: AxisRange = AxisRange(lo=0.0, hi=0.4, step=0.05)
    horizon: float = Field(15.0, gt=0, description="Simulated time per record in seconds")
    step_size: float = Field(0.05, gt=0, description="Integration step in seconds")
    n_paths: int = Field(100, ge=1, description="Number of random paths")
    n_waypoints: int = Field(50, ge=2, description="Waypoints per random path")
    segment_length: float = Field(1.0, gt=0, description="Random path segment length in meters")
    turn_limit: float = Field(0.5, ge=0, description="Per-waypoint turn bound in radians")
    conv_dist: float = Field(0.1, gt=0, description="Convergence distance in meters")
    conv_hold: float = Field(1.5, gt=0, description="Convergence hold time in seconds")
    runaway_distance: float = Field(10.0, gt=0, description="Abort distance in meters")
    densify_spacing: float = Field(0.5, gt=0, description="Path densification in meters")
    path_seed: int = Field(0, ge=0, description="Seed of the random path family")

    @field_validator("rp_range")
    @classmethod
    def _rp_non_negative(cls, value: AxisRange) -> AxisRange:
        if value.lo < 0:
            raise ValueError("rp_range must start at or after the first waypoint")
        return value

    @model_validator(mode="after")
    def _check_timing(self) -> SweepConfig:
        if self.conv_hold >= self.horizon:
            raise ValueError("conv_hold must be shorter than horizon")
        n_steps = self.horizon / self.step_size
        if abs(n_steps - round(n_steps)) > 1e-6:
            raise ValueError("step_size must divide horizon")
        if self.rp_range.hi >= self.segment_length:
            raise ValueError("rp_range must stay on the first path segment")
        return self

    @property
    def n_steps(self) -> int:
        return round(self.horizon / self.step_size)

    @property
    def hold_steps(self) -> int:
        return round(self.conv_hold / self.step_size)

    @property
    def n_states(self) -> int:
        return self.d0_range.count * self.theta0_range.count * self.rp_range.count

    @property
    def n_records(self) -> int:
        return self.n_states * self.n_paths

    @classmethod
    def quick(cls, **overrides: object) -> SweepConfig:
        """Coarse preset: 0.2 m x 0.2 rad x 0.1 m grid over 10 paths."""
        base = cls()
        values: dict[str, object] = {
            "d0_range": base.d0_range.model_copy(update={"step": 0.2}),
            "theta0_range": base.theta0_range.model_copy(update={"step": 0.2}),
            "rp_range": base.rp_range.model_copy(update={"step": 0.1}),
            "n_paths": 10,
        }
        values.update(overrides)
        return cls.model_validate(values)


# ── Tracks ───────────────────────────────────────────────────────────
class SquareTrackParams(BaseModel):
    """Rectangular circuit traversed for several laps."""

    model_config = ConfigDict(frozen=True)

    sideways: float = Field(10.0, gt=0, description="Length of the sideways legs in meters")
    downwards: float = Field(7.5, gt=0, description="Length of the downward legs in meters")
    laps: int = Field(2, ge=1)
    spacing: float = Field(0.5, gt=0, description="Waypoint spacing in meters")


class CosineTrackParams(BaseModel):
    """Track ``y = A cos(2 pi x / wavelength)`` over ``[0, span]``."""

    model_config = ConfigDict(frozen=True)

    amplitude: float = Field(2.0, ge=0, description="Amplitude A in meters")
    wavelength: float = Field(20.0, gt=0, description="Wavelength in meters")
    span: float = Field(60.0, gt=0, description="Extent along x in meters")
    spacing: float = Field(0.5, gt=0, description="Sampling step along x in meters")


class TrackParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    square: SquareTrackParams = SquareTrackParams()
    cosine: CosineTrackParams = CosineTrackParams()


# ── Runs and benchmarks ──────────────────────────────────────────────
class InitialPerturbation(BaseModel):
    """Uniform random start offset drawn per run."""

    model_config = ConfigDict(frozen=True)

    d0_max: float = Field(0.1, ge=0, description="Half-width of the lateral offset in meters")
    theta0_max: float = Field(0.1, ge=0, description="Half-width of the heading offset in rad")
    d0: float | None = Field(None, description="Fixed lateral offset overriding the draw")
    theta0: float | None = Field(None, description="Fixed heading offset overriding the draw")


class RunConfig(BaseModel):
    """One (controller, track) cell of a benchmark."""

    model_config = ConfigDict(frozen=True)

    controller: ControllerId = "pp"
    track: TrackId = "square"
    n_runs: int = Field(30, ge=1)
    seed: int = Field(0, ge=0, description="Seed of run 0; run i uses seed + i")
    max_sim_time: float = Field(300.0, gt=0, description="Upper bound on simulated seconds")
    perturbation: InitialPerturbation = InitialPerturbation()
    strategy: DecisionStrategy = "instantaneous"
    completion_tolerance: float = Field(0.25, gt=0, description="Completion distance in meters")
    runaway_distance: float = Field(10.0, gt=0, description="Abort distance in meters")


class BenchmarkSuite(BaseModel):
    """Cartesian product of controllers and tracks sharing run settings."""

    model_config = ConfigDict(frozen=True)

    controllers: tuple[ControllerId, ...] = DEFAULT_CONTROLLERS
    tracks: tuple[TrackId, ...] = DEFAULT_TRACKS
    n_runs: int = Field(30, ge=1)
    seed: int = Field(0, ge=0)
    max_sim_time: float = Field(300.0, gt=0)
    perturbation: InitialPerturbation = InitialPerturbation()
    strategy: DecisionStrategy = "instantaneous"

    def configs(self) -> list[RunConfig]:
        return [
            RunConfig(
                controller=controller,
                track=track,
                n_runs=self.n_runs,
                seed=self.seed,
                max_sim_time=self.max_sim_time,
                perturbation=self.perturbation,
                strategy=self.strategy,
            )
            for controller in self.controllers
            for track in self.tracks
        ]


class AppConfig(BaseModel):
    """Top-level configuration consumed by the command-line interface."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    limits: RobotLimits = RobotLimits()
    pure_pursuit: PurePursuitParams = PurePursuitParams()
    tracker: TrackerGains = TrackerGains()
    perturbation: UnsafePerturbation = UnsafePerturbation()
    sweep: SweepConfig = SweepConfig()
    safety_bound: float = Field(1.0, gt=0, description="Corridor half-width in meters")
    heading_margin: float = Field(
        0.1, ge=0, description="Per-tick path tangent change budget of the shrunk set, rad"
    )
    safe_set_path: Path | None = Field(None, description="Precomputed safe-set file")
    policy_file: Path | None = Field(None, description="Grid policy for the 'policy' controller")
    tracks: TrackParams = TrackParams()
    bench: BenchmarkSuite = BenchmarkSuite()
    output_dir: Path = Path("results")
    seed: int = Field(
        0, ge=0, description="Default path seed of the sweep and seed of run 0 of the benchmark"
    )

    @model_validator(mode="after")
    def _check_against_limits(self) -> AppConfig:
        if self.pure_pursuit.v_cmd > self.limits.v_max:
            raise ValueError("pure_pursuit.v_cmd must not exceed limits.v_max")
        if self.tracker.v_min > self.limits.v_max:
            raise ValueError("tracker.v_min must not exceed limits.v_max")
        return self

    @classmethod
    def from_file(cls, path: str | Path) -> AppConfig:
        """Load and validate a JSON config file."""
        return cls.model_validate_json(Path(path).read_text())

    def sweep_config(self) -> SweepConfig:
        """The sweep section; the global seed fills in a path seed it leaves unset."""
        if "path_seed" in self.sweep.model_fields_set:
            return self.sweep
        return self.sweep.model_copy(update={"path_seed": self.seed})

    def bench_suite(self) -> BenchmarkSuite:
        """The benchmark section; the global seed fills in a run seed it leaves unset."""
        if "seed" in self.bench.model_fields_set:
            return self.bench
        return self.bench.model_copy(update={"seed": self.seed})

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


# ── Results ──────────────────────────────────────────────────────────
class RunMetrics(BaseModel):
    """Per-run tracking statistics."""

    mean_d: float = Field(..., ge=0, description="Time-averaged |d_P| in meters")
    max_d: float = Field(..., ge=0, description="Maximum |d_P| in meters")
    mean_v: float = Field(..., ge=0, description="Time-averaged commanded velocity in m/s")
    completion: bool
    switches_to_ha: int = Field(0, ge=0)
    switches_to_hp: int = Field(0, ge=0)
    fraction_time_ha: float = Field(0.0, ge=0, le=1)
    duration: float = Field(0.0, ge=0, description="Simulated seconds")
    aborted: bool = False
    diagnostic: str | None = None

    @model_validator(mode="after")
    def _check_mean_below_max(self) -> RunMetrics:
        if self.mean_d > self.max_d * (1.0 + 1e-12):
            raise ValueError("mean_d must not exceed max_d")
        return self


class RunSummary(BaseModel):
    """One run of a benchmark, flattened for tabular export."""

    controller: str
    track: str
    run_index: int = Field(..., ge=0)
    seed: int
    metrics: RunMetrics


class ReportRow(BaseModel):
    """Aggregate of all runs of one (controller, track) configuration."""

    controller: str
    track: str
    mean_d: float
    max_d: float
    mean_v: float
    switches_to_ha: float
    fraction_time_ha: float
    n_runs: int
    completion_rate: float = 1.0


class SafeSetSummary(BaseModel):
    set_max_d: float
    shrunk_max_d: float
    dwell_time: float
    n_cells: int
    n_shrunk_cells: int


class BenchmarkReport(BaseModel):
    """Benchmark table plus the per-run records it was aggregated from."""

    rows: list[ReportRow] = Field(default_factory=list)
    runs: list[RunSummary] = Field(default_factory=list)
    safe_set: SafeSetSummary | None = None


__all__ = [
    "DEFAULT_CONTROLLERS",
    "DEFAULT_TRACKS",
    "AppConfig",
    "AxisRange",
    "BenchmarkReport",
    "BenchmarkSuite",
    "ControllerId",
    "CosineTrackParams",
    "DecisionStrategy",
    "InitialPerturbation",
    "PurePursuitParams",
    "ReportRow",
    "RobotLimits",
    "RunConfig",
    "RunMetrics",
    "RunSummary",
    "SafeSetSummary",
    "SquareTrackParams",
    "SweepConfig",
    "TrackId",
    "TrackParams",
    "TrackerGains",
    "UnsafePerturbation",
]
