"""Path-tracking controllers.

All controllers share the :class:`Controller` template: the input is
checked for finiteness, the robot stops once it reaches the end of the
path, the concrete law produces a raw ``(v, omega)`` pair, and the pair
is saturated to the robot limits. Concrete laws:

- :class:`PurePursuitController` - geometric pure pursuit, the
  high-assurance fallback.
- :class:`ScriptedTracker` - heading plus cross-track feedback towards a
  previewed point, fast on straights and slowing into bends.
- :class:`UnsafeTracker` - the scripted tracker with an oscillating
  heading bias, corner over-rotation and no slowdown.
- :class:`PolicyTable` - a grid policy loaded from CSV.
"""

from __future__ import annotations

import logging
import math
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import IO, ClassVar

import numpy as np
import pandas as pd
from numpy.typing import NDArray

from simplextrack.kinematics import (
    STOP,
    ControlCommand,
    KinematicsError,
    Pose,
    clamp_command,
    wrap_angle,
)
from simplextrack.path import Path, PathFrame, lookahead_many, lookahead_point, project
from simplextrack.schemas import (
    PurePursuitParams,
    RobotLimits,
    TrackerGains,
    UnsafePerturbation,
)

logger = logging.getLogger(__name__)

# Progress within this distance of the final waypoint counts as the end.
END_TOLERANCE = 1e-6

POLICY_COLUMNS = ["d_lo", "d_hi", "theta_lo", "theta_hi", "v", "omega"]


class ControllerError(ValueError):
    """Raised for out-of-domain controller inputs."""


class PolicyFileError(ControllerError):
    """Raised when a policy file is malformed or violates the robot limits."""


@dataclass(frozen=True, slots=True)
class ControllerInput:
    """Everything a controller may look at on one tick."""

    pose: Pose
    frame: PathFrame
    path: Path
    time: float


def at_path_end(frame: PathFrame, path: Path) -> bool:
    return frame.arclength >= path.length - END_TOLERANCE


class Controller(ABC):
    """Common ``compute`` contract of every controller."""

    name: ClassVar[str] = "controller"

    def __init__(self, limits: RobotLimits | None = None) -> None:
        self.limits = limits or RobotLimits()

    def compute(self, inp: ControllerInput) -> ControlCommand:
        """Command for *inp*, always within the robot limits."""
        frame = inp.frame
        if not all(
            math.isfinite(value)
            for value in (frame.d_signed, frame.theta_rel, frame.arclength, inp.time)
        ):
            raise ControllerError(f"{self.name}: non-finite controller input {frame}")
        if at_path_end(frame, inp.path):
            return STOP
        v, omega = self._command(inp)
        try:
            return clamp_command(v, omega, self.limits)
        except KinematicsError as exc:
            raise ControllerError(f"{self.name}: {exc}") from exc

    @abstractmethod
    def _command(self, inp: ControllerInput) -> tuple[float, float]:
        """Raw (unsaturated) command."""

    def __repr__(self) -> str:
        return f"{type(self).__name__}()"


# ── pure pursuit ─────────────────────────────────────────────────────
class PurePursuitController(Controller):
    """Steer along the arc through the robot and the lookahead point.

    ``kappa = 2 * y_l / L_eff**2`` where ``y_l`` is the lateral offset of
    the lookahead point in the robot frame and ``L_eff`` its actual
    distance (equal to the lookahead except in the end-of-path fallback).
    """

    name = "pure_pursuit"

    def __init__(
        self, params: PurePursuitParams | None = None, limits: RobotLimits | None = None
    ) -> None:
        super().__init__(limits)
        self.params = params or PurePursuitParams()

    def _command(self, inp: ControllerInput) -> tuple[float, float]:
        lx, ly = lookahead_point(inp.path, inp.frame, self.params.lookahead)
        dx, dy = lx - inp.pose.x, ly - inp.pose.y
        l_eff = math.hypot(dx, dy)
        v = self.params.v_cmd
        if l_eff < 1e-9:
            return v, 0.0
        y_l = -math.sin(inp.pose.theta) * dx + math.cos(inp.pose.theta) * dy
        return v, v * 2.0 * y_l / l_eff**2

    def __repr__(self) -> str:
        return f"PurePursuitController(lookahead={self.params.lookahead}, v={self.params.v_cmd})"


def pure_pursuit(
    inp: ControllerInput,
    params: PurePursuitParams | None = None,
    limits: RobotLimits | None = None,
) -> ControlCommand:
    """One pure-pursuit command; see :class:`PurePursuitController`."""
    return PurePursuitController(params, limits).compute(inp)


def pure_pursuit_many(
    path: Path,
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    theta: NDArray[np.float64],
    segment: NDArray[np.intp],
    arclength: NDArray[np.float64],
    params: PurePursuitParams,
    limits: RobotLimits,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Pure pursuit for a batch of robots on one path; returns ``(v, omega)``."""
    lx, ly = lookahead_many(path, x, y, segment, arclength, params.lookahead)
    dx, dy = lx - x, ly - y
    l_eff2 = dx**2 + dy**2
    y_l = -np.sin(theta) * dx + np.cos(theta) * dy
    safe = l_eff2 >= 1e-18
    kappa = np.where(safe, 2.0 * y_l / np.where(safe, l_eff2, 1.0), 0.0)
    v = np.full_like(x, min(params.v_cmd, limits.v_max))
    omega = np.clip(v * kappa, -limits.omega_max, limits.omega_max)
    done = arclength >= path.length - END_TOLERANCE
    return np.where(done, 0.0, v), np.where(done, 0.0, omega)


# ── scripted trackers ────────────────────────────────────────────────
def _tracker_command(
    inp: ControllerInput,
    gains: TrackerGains,
    limits: RobotLimits,
    perturbation: UnsafePerturbation | None = None,
) -> tuple[float, float]:
    frame, path = inp.frame, inp.path
    psi_seg = float(path.segment_headings[frame.segment_index])
    cx, cy = path.point_at(frame.arclength + gains.preview)
    fx, fy = frame.foot
    if math.hypot(cx - fx, cy - fy) < 1e-9:
        psi_ref = psi_seg
    else:
        psi_ref = math.atan2(cy - fy, cx - fx)
    bend = wrap_angle(psi_ref - psi_seg)

    bias = 0.0
    hold_speed = False
    if perturbation is not None:
        psi_ref = psi_seg + perturbation.overshoot_gain * bend
        bias = perturbation.bias_amplitude * math.sin(
            math.tau * inp.time / perturbation.bias_period + perturbation.bias_phase
        )
        hold_speed = perturbation.hold_speed

    heading_error = wrap_angle(inp.pose.theta - psi_ref - bias)
    omega = -gains.heading_gain * heading_error - gains.cross_track_gain * frame.d_signed
    if hold_speed:
        v = limits.v_max
    else:
        v = limits.v_max * (1.0 - gains.slowdown_gain * abs(bend))
        v = min(max(v, gains.v_min), limits.v_max)
    return v, omega


class ScriptedTracker(Controller):
    """Heading plus cross-track feedback towards a previewed path point.

    The reference heading points from the foot of the projection to the
    path point ``preview`` meters ahead, so the robot starts turning
    before a bend. Speed drops with the previewed bend angle.
    """

    name = "scripted"

    def __init__(
        self, gains: TrackerGains | None = None, limits: RobotLimits | None = None
    ) -> None:
        super().__init__(limits)
        self.gains = gains or TrackerGains()

    def _command(self, inp: ControllerInput) -> tuple[float, float]:
        return _tracker_command(inp, self.gains, self.limits)


class UnsafeTracker(Controller):
    """Scripted tracker with a destabilising perturbation.

    Adds a sinusoidal heading bias, multiplies the previewed bend by
    ``overshoot_gain`` and keeps full speed through bends.
    """

    name = "unsafe"

    def __init__(
        self,
        gains: TrackerGains | None = None,
        perturbation: UnsafePerturbation | None = None,
        limits: RobotLimits | None = None,
    ) -> None:
        super().__init__(limits)
        self.gains = gains or TrackerGains()
        self.perturbation = perturbation or UnsafePerturbation()

    def _command(self, inp: ControllerInput) -> tuple[float, float]:
        return _tracker_command(inp, self.gains, self.limits, self.perturbation)


def scripted_tracker(
    inp: ControllerInput,
    gains: TrackerGains | None = None,
    limits: RobotLimits | None = None,
) -> ControlCommand:
    return ScriptedTracker(gains, limits).compute(inp)


def unsafe_tracker(
    inp: ControllerInput,
    perturbation: UnsafePerturbation | None = None,
    gains: TrackerGains | None = None,
    limits: RobotLimits | None = None,
) -> ControlCommand:
    return UnsafeTracker(gains, perturbation, limits).compute(inp)


# ── grid policies ────────────────────────────────────────────────────
class PolicyTable(Controller):
    """Piecewise-constant policy over ``(d_signed, theta_rel)`` bins.

    States outside the tiled box are clamped onto its border bins.
    """

    name = "policy"

    def __init__(
        self,
        d_edges: Sequence[float],
        theta_edges: Sequence[float],
        v: NDArray[np.float64],
        omega: NDArray[np.float64],
        limits: RobotLimits | None = None,
    ) -> None:
        super().__init__(limits)
        self.d_edges = np.asarray(d_edges, dtype=float)
        self.theta_edges = np.asarray(theta_edges, dtype=float)
        self.v = np.asarray(v, dtype=float)
        self.omega = np.asarray(omega, dtype=float)
        shape = (len(self.d_edges) - 1, len(self.theta_edges) - 1)
        if self.v.shape != shape or self.omega.shape != shape:
            raise PolicyFileError(f"command tables must have shape {shape}")

    @property
    def shape(self) -> tuple[int, int]:
        return (len(self.d_edges) - 1, len(self.theta_edges) - 1)

    def lookup(self, d: float, theta: float) -> tuple[float, float]:
        """Command stored for the bin containing the clamped state."""
        i = int(np.searchsorted(self.d_edges, d, side="right")) - 1
        j = int(np.searchsorted(self.theta_edges, theta, side="right")) - 1
        i = min(max(i, 0), self.shape[0] - 1)
        j = min(max(j, 0), self.shape[1] - 1)
        return float(self.v[i, j]), float(self.omega[i, j])

    def _command(self, inp: ControllerInput) -> tuple[float, float]:
        return self.lookup(inp.frame.d_signed, inp.frame.theta_rel)

    def to_frame(self) -> pd.DataFrame:
        rows = [
            (
                self.d_edges[i],
                self.d_edges[i + 1],
                self.theta_edges[j],
                self.theta_edges[j + 1],
                self.v[i, j],
                self.omega[i, j],
            )
            for i in range(self.shape[0])
            for j in range(self.shape[1])
        ]
        return pd.DataFrame(rows, columns=POLICY_COLUMNS)

    def __repr__(self) -> str:
        return f"PolicyTable(bins={self.shape[0]}x{self.shape[1]})"


def _edges(lo: NDArray[np.float64], hi: NDArray[np.float64], axis: str) -> NDArray[np.float64]:
    if np.any(hi <= lo):
        raise PolicyFileError(f"{axis} bins must satisfy lo < hi")
    starts = np.unique(lo)
    ends = np.unique(hi)
    if not np.array_equal(starts[1:], ends[:-1]):
        raise PolicyFileError(f"{axis} bins do not tile the state box without gaps or overlaps")
    return np.concatenate((starts, ends[-1:]))


def policy_from_frame(frame: pd.DataFrame, limits: RobotLimits | None = None) -> PolicyTable:
    """Validate a policy table and build the controller."""
    limits = limits or RobotLimits()
    values = frame.to_numpy(dtype=float)
    if values.size == 0:
        raise PolicyFileError("policy file holds no bins")
    if not np.all(np.isfinite(values)):
        raise PolicyFileError("policy file holds non-finite values")
    d_lo, d_hi, t_lo, t_hi, v, omega = values.T

    d_edges = _edges(d_lo, d_hi, "d")
    theta_edges = _edges(t_lo, t_hi, "theta")
    n_d, n_theta = len(d_edges) - 1, len(theta_edges) - 1
    if len(values) != n_d * n_theta:
        raise PolicyFileError(f"expected {n_d * n_theta} bins for the tiling, found {len(values)}")

    i = np.searchsorted(d_edges, d_lo)
    j = np.searchsorted(theta_edges, t_lo)
    if not (np.array_equal(d_edges[i + 1], d_hi) and np.array_equal(theta_edges[j + 1], t_hi)):
        raise PolicyFileError("a bin spans more than one grid interval")
    flat = i * n_theta + j
    if len(np.unique(flat)) != len(flat):
        raise PolicyFileError("duplicate bins in policy file")

    if np.any(v < 0) or np.any(v > limits.v_max):
        raise PolicyFileError(f"v outside [0, {limits.v_max}] m/s")
    if np.any(np.abs(omega) > limits.omega_max):
        raise PolicyFileError(f"|omega| above {limits.omega_max} rad/s")

    v_table = np.empty((n_d, n_theta))
    omega_table = np.empty((n_d, n_theta))
    v_table[i, j] = v
    omega_table[i, j] = omega
    return PolicyTable(d_edges, theta_edges, v_table, omega_table, limits)


def policy_file_controller(
    file: str | FilePath | IO[str], limits: RobotLimits | None = None
) -> PolicyTable:
    """Load a ``d_lo,d_hi,theta_lo,theta_hi,v,omega`` CSV policy.

    A header row is optional.
    """
    try:
        raw = pd.read_csv(file, header=None, dtype=str, skipinitialspace=True)
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise PolicyFileError(f"unreadable policy file: {exc}") from exc
    except OSError as exc:
        raise PolicyFileError(f"cannot open policy file: {exc}") from exc
    if raw.shape[1] != len(POLICY_COLUMNS):
        raise PolicyFileError(
            f"policy file must have {len(POLICY_COLUMNS)} columns, found {raw.shape[1]}"
        )
    if str(raw.iloc[0, 0]).strip() == POLICY_COLUMNS[0]:
        raw = raw.iloc[1:]
    try:
        frame = raw.astype(float)
    except ValueError as exc:
        raise PolicyFileError(f"policy file holds non-numeric values: {exc}") from exc
    frame.columns = POLICY_COLUMNS
    policy = policy_from_frame(frame, limits)
    logger.info("Loaded %s", policy)
    return policy


# ── policy tabulation ────────────────────────────────────────────────
REFERENCE_HALF_LENGTH = 50.0


def reference_path() -> Path:
    """Straight path along +x used to tabulate controllers."""
    return Path([(-REFERENCE_HALF_LENGTH, 0.0), (REFERENCE_HALF_LENGTH, 0.0)])


def reference_input(d: float, theta: float, path: Path | None = None) -> ControllerInput:
    """Input with the robot at lateral offset *d* and heading *theta* mid-way along the path."""
    path = path or reference_path()
    pose = Pose(0.0, d, theta)
    frame = project(path, pose.position, pose.theta)
    return ControllerInput(pose=pose, frame=frame, path=path, time=0.0)


def tabulate_policy(
    controller: Controller,
    d_edges: Sequence[float],
    theta_edges: Sequence[float],
) -> PolicyTable:
    """Evaluate *controller* at every bin centre of the given grid."""
    d_arr = np.asarray(d_edges, dtype=float)
    t_arr = np.asarray(theta_edges, dtype=float)
    path = reference_path()
    v = np.empty((len(d_arr) - 1, len(t_arr) - 1))
    omega = np.empty_like(v)
    for i in range(v.shape[0]):
        d_mid = 0.5 * (d_arr[i] + d_arr[i + 1])
        for j in range(v.shape[1]):
            t_mid = 0.5 * (t_arr[j] + t_arr[j + 1])
            cmd = controller.compute(reference_input(d_mid, t_mid, path))
            v[i, j], omega[i, j] = cmd.v, cmd.omega
    return PolicyTable(d_arr, t_arr, v, omega, controller.limits)


def write_policy_file(
    controller: Controller,
    file: str | FilePath | IO[str],
    d_edges: Sequence[float],
    theta_edges: Sequence[float],
) -> PolicyTable:
    """Tabulate *controller* and write the policy CSV (with header)."""
    policy = tabulate_policy(controller, d_edges, theta_edges)
    policy.to_frame().to_csv(file, index=False, float_format="%.17g")
    return policy


__all__ = [
    "POLICY_COLUMNS",
    "Controller",
    "ControllerError",
    "ControllerInput",
    "PolicyFileError",
    "PolicyTable",
    "PurePursuitController",
    "ScriptedTracker",
    "UnsafeTracker",
    "at_path_end",
    "policy_file_controller",
    "policy_from_frame",
    "pure_pursuit",
    "pure_pursuit_many",
    "reference_input",
    "reference_path",
    "scripted_tracker",
    "tabulate_policy",
    "unsafe_tracker",
]
