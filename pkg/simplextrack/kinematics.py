"""Differential-drive (unicycle) kinematics.

State is ``(x, y, theta)`` and the robot is driven by a linear velocity
``v`` and an angular velocity ``omega``::

    x' = v cos(theta)
    y' = v sin(theta)
    theta' = omega

:func:`step` integrates the model with fixed-step classical Runge-Kutta
(4th order) at no more than one control period per sub-step.
:func:`integrate_arc_exact` is the closed-form solution for a constant
command and serves as the test oracle. :func:`rk4_step_many` is the
vectorised kernel used by the reachability sweep.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from simplextrack.schemas import RobotLimits

# Largest RK4 sub-step (s); equals the default control period.
MAX_SUBSTEP = 0.05

# Below this |omega| (rad/s) the exact solution is taken as a straight line.
ARC_EPSILON = 1e-9


class KinematicsError(ValueError):
    """Raised for non-finite states, commands or time steps."""


def wrap_angle(angle: float) -> float:
    """Wrap *angle* to the half-open interval (-pi, pi]."""
    if not math.isfinite(angle):
        raise KinematicsError(f"cannot wrap non-finite angle {angle!r}")
    wrapped = math.remainder(angle, math.tau)
    return math.pi if wrapped <= -math.pi else wrapped


def wrap_angles(angles: NDArray[np.float64]) -> NDArray[np.float64]:
    """Vectorised :func:`wrap_angle` (no finiteness check)."""
    wrapped = np.remainder(angles + math.pi, math.tau) - math.pi
    return np.where(wrapped <= -math.pi, wrapped + math.tau, wrapped)


@dataclass(frozen=True, slots=True)
class Pose:
    """Robot configuration; ``theta`` is stored wrapped to (-pi, pi]."""

    x: float
    y: float
    theta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.theta)):
            raise KinematicsError(f"non-finite pose ({self.x}, {self.y}, {self.theta})")
        object.__setattr__(self, "theta", wrap_angle(self.theta))

    @property
    def position(self) -> tuple[float, float]:
        return (self.x, self.y)


@dataclass(frozen=True, slots=True)
class ControlCommand:
    """Actuation pair ``(v, omega)`` in m/s and rad/s."""

    v: float
    omega: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.v) and math.isfinite(self.omega)):
            raise KinematicsError(f"non-finite command ({self.v}, {self.omega})")

    def within(self, limits: RobotLimits) -> bool:
        """True iff ``0 <= v <= v_max`` and ``|omega| <= omega_max``."""
        return 0.0 <= self.v <= limits.v_max and abs(self.omega) <= limits.omega_max


STOP = ControlCommand(0.0, 0.0)


def clamp_command(v: float, omega: float, limits: RobotLimits) -> ControlCommand:
    """Saturate a raw ``(v, omega)`` pair to the robot's physical limits."""
    if not (math.isfinite(v) and math.isfinite(omega)):
        raise KinematicsError(f"cannot clamp non-finite command ({v}, {omega})")
    return ControlCommand(
        v=min(max(v, 0.0), limits.v_max),
        omega=min(max(omega, -limits.omega_max), limits.omega_max),
    )


def _check_dt(dt: float) -> None:
    if not math.isfinite(dt) or dt <= 0:
        raise KinematicsError(f"time step must be positive and finite, got {dt!r}")


def _rk4_substep(
    x: float, y: float, theta: float, v: float, omega: float, h: float
) -> tuple[float, float, float]:
    # theta' does not depend on the state, so the stage headings are explicit.
    theta_mid = theta + 0.5 * h * omega
    theta_end = theta + h * omega
    k1x, k1y = v * math.cos(theta), v * math.sin(theta)
    k23x, k23y = v * math.cos(theta_mid), v * math.sin(theta_mid)
    k4x, k4y = v * math.cos(theta_end), v * math.sin(theta_end)
    x += h / 6.0 * (k1x + 4.0 * k23x + k4x)
    y += h / 6.0 * (k1y + 4.0 * k23y + k4y)
    return x, y, theta_end


def step(pose: Pose, cmd: ControlCommand, dt: float) -> Pose:
    """Integrate the unicycle model over *dt* seconds with fixed-step RK4.

    The interval is split into ``ceil(dt / MAX_SUBSTEP)`` equal sub-steps,
    so one control period is exactly one RK4 step.

    Parameters
    ----------
    pose : Pose
        Initial configuration.
    cmd : ControlCommand
        Command held constant over the interval.
    dt : float
        Integration interval in seconds, strictly positive.

    Returns
    -------
    Pose
        Configuration after *dt*, heading wrapped to (-pi, pi].
    """
    _check_dt(dt)
    n_sub = max(1, math.ceil(dt / MAX_SUBSTEP - 1e-9))
    h = dt / n_sub
    x, y, theta = pose.x, pose.y, pose.theta
    for _ in range(n_sub):
        x, y, theta = _rk4_substep(x, y, theta, cmd.v, cmd.omega, h)
    return Pose(x, y, theta)


def euler_step(pose: Pose, cmd: ControlCommand, dt: float) -> Pose:
    """Single forward-Euler step, used for one-step state prediction."""
    _check_dt(dt)
    return Pose(
        pose.x + dt * cmd.v * math.cos(pose.theta),
        pose.y + dt * cmd.v * math.sin(pose.theta),
        pose.theta + dt * cmd.omega,
    )


def integrate_arc_exact(pose: Pose, cmd: ControlCommand, dt: float) -> Pose:
    """Closed-form solution for a command held constant over *dt*.

    A straight line when ``|omega| < ARC_EPSILON``, otherwise a circular
    arc of radius ``v / omega``.
    """
    _check_dt(dt)
    theta_end = pose.theta + cmd.omega * dt
    if abs(cmd.omega) < ARC_EPSILON:
        return Pose(
            pose.x + cmd.v * dt * math.cos(pose.theta),
            pose.y + cmd.v * dt * math.sin(pose.theta),
            theta_end,
        )
    radius = cmd.v / cmd.omega
    return Pose(
        pose.x + radius * (math.sin(theta_end) - math.sin(pose.theta)),
        pose.y - radius * (math.cos(theta_end) - math.cos(pose.theta)),
        theta_end,
    )


def rk4_step_many(
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    theta: NDArray[np.float64],
    v: NDArray[np.float64],
    omega: NDArray[np.float64],
    h: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64], NDArray[np.float64]]:
    """One RK4 step of length *h* for a batch of robots.

    Same stage arithmetic as :func:`step`; headings are returned wrapped.
    """
    theta_mid = theta + 0.5 * h * omega
    theta_end = theta + h * omega
    cos_sum = np.cos(theta) + 4.0 * np.cos(theta_mid) + np.cos(theta_end)
    sin_sum = np.sin(theta) + 4.0 * np.sin(theta_mid) + np.sin(theta_end)
    return (
        x + h / 6.0 * v * cos_sum,
        y + h / 6.0 * v * sin_sum,
        wrap_angles(theta_end),
    )


__all__ = [
    "ARC_EPSILON",
    "MAX_SUBSTEP",
    "STOP",
    "ControlCommand",
    "KinematicsError",
    "Pose",
    "clamp_command",
    "euler_step",
    "integrate_arc_exact",
    "rk4_step_many",
    "step",
    "wrap_angle",
    "wrap_angles",
]
