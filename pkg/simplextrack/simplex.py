"""Decision module and the composed Simplex controller.

The high-performance controller drives while the robot's path-relative
state lies in the shrunk safe set. As soon as it leaves the set the
high-assurance controller takes over, and control returns only once the
state is back inside the set and the dwell time has elapsed since the
switch.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field, replace
try:
    from enum import StrEnum
except ImportError:  # Python < 3.11
    from enum import Enum

    class StrEnum(str, Enum):  # type: ignore[no-redef]
        __str__ = str.__str__
        __format__ = str.__format__
from pathlib import Path as FilePath
from typing import IO, Literal, Protocol

import pandas as pd

from simplextrack.controllers import Controller, ControllerInput
from simplextrack.kinematics import ControlCommand, euler_step
from simplextrack.path import project
from simplextrack.reachability import SafeSet, membership
from simplextrack.schemas import RobotLimits

logger = logging.getLogger(__name__)

# Slack on the dwell comparison, absorbs accumulated tick arithmetic.
DWELL_TOLERANCE = 1e-9

TRACE_COLUMNS = ["t", "mode", "d_signed", "theta_rel", "v", "omega"]

Strategy = Literal["instantaneous", "predictive"]


class Mode(StrEnum):
    HIGH_PERFORMANCE = "PERFORMANCE"
    HIGH_ASSURANCE = "ASSURANCE"


class SwitchingError(ValueError):
    """Raised for inconsistent decision-module bookkeeping."""


class PathState(Protocol):
    @property
    def d_signed(self) -> float: ...

    @property
    def theta_rel(self) -> float: ...


@dataclass(frozen=True, slots=True)
class SwitchState:
    """Mode bookkeeping of one run; ``t_entered_ha`` is the latest switch to assurance."""

    mode: Mode = Mode.HIGH_PERFORMANCE
    t_entered_ha: float | None = None
    switch_count_to_ha: int = 0
    switch_count_to_hp: int = 0
    time_in_ha: float = 0.0
    last_t: float | None = None

    def __post_init__(self) -> None:
        if self.mode is Mode.HIGH_ASSURANCE and self.t_entered_ha is None:
            raise SwitchingError("assurance mode requires t_entered_ha")


def initial_switch_state(frame: PathState, safe_set: SafeSet, t0: float = 0.0) -> SwitchState:
    """Start in performance mode unless the initial state is outside the set."""
    if membership(safe_set, frame.d_signed, frame.theta_rel):
        return SwitchState()
    logger.debug(
        "Initial state (%.3f, %.3f) outside the safe set", frame.d_signed, frame.theta_rel
    )
    return SwitchState(mode=Mode.HIGH_ASSURANCE, t_entered_ha=t0)


def decide(
    frame: PathState, t: float, state: SwitchState, safe_set: SafeSet
) -> tuple[Mode, SwitchState]:
    """Select the controller for time *t*.

    Performance mode iff the state is in the shrunk set and either the
    previous mode was performance or ``t >= t_entered_ha + dwell_time``.
    Switches to assurance are never delayed.
    """
    if not math.isfinite(t):
        raise SwitchingError(f"non-finite decision time {t!r}")
    if state.last_t is not None and t < state.last_t:
        raise SwitchingError(f"time ran backward: {t} after {state.last_t}")

    inside = membership(safe_set, frame.d_signed, frame.theta_rel)
    elapsed = 0.0 if state.last_t is None else t - state.last_t
    time_in_ha = state.time_in_ha
    if state.mode is Mode.HIGH_ASSURANCE:
        time_in_ha += elapsed

    if state.mode is Mode.HIGH_PERFORMANCE:
        if inside:
            return Mode.HIGH_PERFORMANCE, replace(state, last_t=t, time_in_ha=time_in_ha)
        return Mode.HIGH_ASSURANCE, replace(
            state,
            mode=Mode.HIGH_ASSURANCE,
            t_entered_ha=t,
            switch_count_to_ha=state.switch_count_to_ha + 1,
            time_in_ha=time_in_ha,
            last_t=t,
        )

    assert state.t_entered_ha is not None
    dwell_over = t + DWELL_TOLERANCE >= state.t_entered_ha + safe_set.dwell_time
    if inside and dwell_over:
        return Mode.HIGH_PERFORMANCE, replace(
            state,
            mode=Mode.HIGH_PERFORMANCE,
            switch_count_to_hp=state.switch_count_to_hp + 1,
            time_in_ha=time_in_ha,
            last_t=t,
        )
    return Mode.HIGH_ASSURANCE, replace(state, time_in_ha=time_in_ha, last_t=t)


def simplex_compute(
    inp: ControllerInput,
    hp: Controller,
    ha: Controller,
    safe_set: SafeSet,
    state: SwitchState,
    strategy: Strategy = "instantaneous",
    limits: RobotLimits | None = None,
) -> tuple[ControlCommand, Mode, SwitchState]:
    """Decide the mode and delegate to the selected controller.

    With ``strategy="predictive"`` the decision uses the state one
    forward-Euler control period after applying the performance command.
    """
    if strategy == "instantaneous":
        mode, new_state = decide(inp.frame, inp.time, state, safe_set)
        controller = hp if mode is Mode.HIGH_PERFORMANCE else ha
        return controller.compute(inp), mode, new_state
    if strategy == "predictive":
        period = (limits or hp.limits).control_period
        hp_cmd = hp.compute(inp)
        predicted = euler_step(inp.pose, hp_cmd, period)
        frame = project(inp.path, predicted.position, predicted.theta, hint=inp.frame.arclength)
        mode, new_state = decide(frame, inp.time, state, safe_set)
        cmd = hp_cmd if mode is Mode.HIGH_PERFORMANCE else ha.compute(inp)
        return cmd, mode, new_state
    raise SwitchingError(f"unknown decision strategy {strategy!r}")


@dataclass(frozen=True)
class SimplexController:
    """High-performance controller guarded by a high-assurance fallback."""

    hp: Controller
    ha: Controller
    safe_set: SafeSet
    strategy: Strategy = "instantaneous"
    limits: RobotLimits = field(default_factory=RobotLimits)

    @property
    def name(self) -> str:
        return f"simplex-{self.hp.name}"

    def initial_state(self, frame: PathState, t0: float = 0.0) -> SwitchState:
        return initial_switch_state(frame, self.safe_set, t0)

    def step(
        self, inp: ControllerInput, state: SwitchState
    ) -> tuple[ControlCommand, Mode, SwitchState]:
        return simplex_compute(
            inp, self.hp, self.ha, self.safe_set, state, self.strategy, self.limits
        )


def replay_modes(
    ticks: Iterable[PathState], times: Iterable[float], safe_set: SafeSet
) -> list[Mode]:
    """Recompute the instantaneous mode sequence of a logged run."""
    modes: list[Mode] = []
    state: SwitchState | None = None
    for tick, t in zip(ticks, times, strict=True):
        if state is None:
            state = initial_switch_state(tick, safe_set, t)
        mode, state = decide(tick, t, state, safe_set)
        modes.append(mode)
    return modes


class TraceRow(Protocol):
    @property
    def t(self) -> float: ...

    @property
    def mode(self) -> Mode: ...

    @property
    def d_signed(self) -> float: ...

    @property
    def theta_rel(self) -> float: ...

    @property
    def v(self) -> float: ...

    @property
    def omega(self) -> float: ...


def mode_trace_frame(rows: Iterable[TraceRow]) -> pd.DataFrame:
    return pd.DataFrame(
        [(r.t, str(r.mode), r.d_signed, r.theta_rel, r.v, r.omega) for r in rows],
        columns=TRACE_COLUMNS,
    )


def write_mode_trace(rows: Iterable[TraceRow], file: str | FilePath | IO[str]) -> None:
    """Write the per-tick ``t,mode,d_signed,theta_rel,v,omega`` CSV."""
    mode_trace_frame(rows).to_csv(file, index=False, float_format="%.17g")


__all__ = [
    "TRACE_COLUMNS",
    "Mode",
    "SimplexController",
    "SwitchState",
    "SwitchingError",
    "decide",
    "initial_switch_state",
    "mode_trace_frame",
    "replay_modes",
    "simplex_compute",
    "write_mode_trace",
]
