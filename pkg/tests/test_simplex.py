"""Tests for the decision module and the composed Simplex controller."""

import io
import math
from dataclasses import dataclass

import numpy as np
import pandas as pd
import pytest

from simplextrack.controllers import (
    Controller,
    ControllerInput,
    PurePursuitController,
    UnsafeTracker,
)
from simplextrack.kinematics import Pose
from simplextrack.path import project, straight_path
from simplextrack.reachability import SafeSet
from simplextrack.schemas import AxisRange
from simplextrack.simplex import (
    TRACE_COLUMNS,
    Mode,
    SimplexController,
    SwitchingError,
    SwitchState,
    decide,
    initial_switch_state,
    replay_modes,
    simplex_compute,
    write_mode_trace,
)
from tests.conftest import get_golden_case

HP = Mode.HIGH_PERFORMANCE
HA = Mode.HIGH_ASSURANCE


@dataclass(frozen=True)
class _State:
    d_signed: float
    theta_rel: float


@dataclass(frozen=True)
class _Row:
    t: float
    mode: Mode
    d_signed: float
    theta_rel: float
    v: float
    omega: float


class _FullSpeedAhead(Controller):
    name = "full_speed"

    def _command(self, inp):
        return 1.0, 0.0


INSIDE = _State(0.0, 0.0)
OUTSIDE = _State(0.7, 0.0)


def _box_safe_set(dwell_time: float = 2.0, shrunk_d: float = 0.5) -> SafeSet:
    """Shrunk set |d| <= shrunk_d, |theta| <= 0.5 inside a |d| <= 0.8, |theta| <= 1.0 region."""
    d_axis = AxisRange(lo=-1.0, hi=1.0, step=0.1)
    theta_axis = AxisRange(lo=-1.5, hi=1.5, step=0.1)
    d, theta = np.meshgrid(d_axis.values(), theta_axis.values(), indexing="ij")
    in_roa = (np.abs(d) <= 0.8 + 1e-9) & (np.abs(theta) <= 1.0 + 1e-9)
    shrunk = (np.abs(d) <= shrunk_d + 1e-9) & (np.abs(theta) <= 0.5 + 1e-9)
    return SafeSet(
        d_axis=d_axis,
        theta_axis=theta_axis,
        in_roa=in_roa,
        worst_max_d=np.where(in_roa, 0.5, np.nan),
        worst_t_conv=np.where(in_roa, dwell_time, np.nan),
        shrunk=shrunk,
        set_max_d=0.9,
        shrunk_max_d=0.85,
        dwell_time=dwell_time,
        safety_bound=1.0,
        motion_bound=0.05,
        theta_margin=0.125,
        path_seed=0,
    )


def _input(d: float, theta: float, t: float = 0.0) -> ControllerInput:
    path = straight_path(20.0)
    pose = Pose(3.0, d, theta)
    return ControllerInput(pose, project(path, pose.position, pose.theta), path, t)


class TestDecide:
    def test_dwell_gated_switch_back(self):
        case = get_golden_case("dwell_switching")
        safe_set = _box_safe_set(case["dwell_time"])
        state = SwitchState(mode=HA, t_entered_ha=case["t_entered_ha"])
        for query in case["queries"]:
            mode, _ = decide(INSIDE, query["t"], state, safe_set)
            assert mode == Mode(query["expected_mode"])

    def test_performance_stays_inside(self):
        mode, state = decide(INSIDE, 0.0, SwitchState(), _box_safe_set())
        assert mode is HP
        assert state.switch_count_to_ha == 0
        assert state.last_t == 0.0

    def test_leaving_the_set_switches_immediately(self):
        mode, state = decide(OUTSIDE, 3.0, SwitchState(last_t=2.95), _box_safe_set())
        assert mode is HA
        assert state.t_entered_ha == 3.0
        assert state.switch_count_to_ha == 1

    def test_assurance_holds_outside_after_dwell(self):
        state = SwitchState(mode=HA, t_entered_ha=0.0)
        mode, _ = decide(OUTSIDE, 100.0, state, _box_safe_set())
        assert mode is HA

    def test_switch_to_assurance_is_never_delayed(self):
        safe_set = _box_safe_set(dwell_time=5.0)
        state = SwitchState(mode=HA, t_entered_ha=0.0)
        mode, state = decide(INSIDE, 5.0, state, safe_set)
        assert mode is HP
        assert state.switch_count_to_hp == 1
        mode, state = decide(OUTSIDE, 5.05, state, safe_set)
        assert mode is HA
        assert state.t_entered_ha == 5.05
        assert state.switch_count_to_ha == 1

    def test_time_in_assurance_accumulates(self):
        safe_set = _box_safe_set(dwell_time=1.0)
        state = SwitchState()
        for k in range(5):
            _, state = decide(OUTSIDE, k * 0.05, state, safe_set)
        assert state.mode is HA
        assert state.time_in_ha == pytest.approx(0.2)

    def test_membership_uses_nearest_cell(self):
        safe_set = _box_safe_set()
        assert decide(_State(0.54, 0.0), 0.0, SwitchState(), safe_set)[0] is HP
        assert decide(_State(0.56, 0.0), 0.0, SwitchState(), safe_set)[0] is HA

    def test_boundary_contour_state_leaves_performance(self):
        safe_set = _box_safe_set(shrunk_d=0.4)
        boundary = _State(0.5, 0.0792)
        mode, state = decide(boundary, 1.0, SwitchState(last_t=0.95), safe_set)
        assert mode is HA
        assert state.switch_count_to_ha == 1
        assert state.t_entered_ha == 1.0
        assert safe_set.contains(0.5, 0.0792, shrunk=False)

    def test_time_running_backward_rejected(self):
        with pytest.raises(SwitchingError):
            decide(INSIDE, 1.0, SwitchState(last_t=2.0), _box_safe_set())

    def test_non_finite_time_rejected(self):
        with pytest.raises(SwitchingError):
            decide(INSIDE, math.nan, SwitchState(), _box_safe_set())

    def test_assurance_requires_entry_time(self):
        with pytest.raises(SwitchingError):
            SwitchState(mode=HA)

    def test_initial_state(self):
        safe_set = _box_safe_set()
        assert initial_switch_state(INSIDE, safe_set).mode is HP
        state = initial_switch_state(OUTSIDE, safe_set, t0=1.5)
        assert state.mode is HA
        assert state.t_entered_ha == 1.5
        assert state.switch_count_to_ha == 0


class TestSimplexCompute:
    def test_identical_controllers_are_transparent(self):
        pp = PurePursuitController()
        safe_set = _box_safe_set()
        state = SwitchState()
        for k, (d, theta) in enumerate([(0.0, 0.0), (0.3, -0.2), (0.7, 0.4), (-0.9, 1.2)]):
            inp = _input(d, theta, t=k * 0.05)
            cmd, _, state = simplex_compute(inp, pp, pp, safe_set, state)
            assert cmd == pp.compute(inp)

    def test_delegates_by_mode(self):
        hp, ha = UnsafeTracker(), PurePursuitController()
        safe_set = _box_safe_set()
        inside = _input(0.1, 0.1, t=6.25)
        cmd, mode, state = simplex_compute(inside, hp, ha, safe_set, SwitchState())
        assert mode is HP
        assert cmd == hp.compute(inside)
        outside = _input(0.8, 0.1, t=6.3)
        cmd, mode, state = simplex_compute(outside, hp, ha, safe_set, state)
        assert mode is HA
        assert cmd == ha.compute(outside)

    def test_predictive_switches_one_period_early(self):
        hp, ha = _FullSpeedAhead(), PurePursuitController()
        safe_set = _box_safe_set()
        inp = _input(0.54, 0.4)
        _, instant, _ = simplex_compute(inp, hp, ha, safe_set, SwitchState())
        cmd, predicted, _ = simplex_compute(
            inp, hp, ha, safe_set, SwitchState(), strategy="predictive"
        )
        assert instant is HP
        assert predicted is HA
        assert cmd == ha.compute(inp)

    def test_predictive_keeps_performance_command(self):
        hp, ha = _FullSpeedAhead(), PurePursuitController()
        inp = _input(0.0, 0.0)
        cmd, mode, _ = simplex_compute(
            inp, hp, ha, _box_safe_set(), SwitchState(), strategy="predictive"
        )
        assert mode is HP
        assert (cmd.v, cmd.omega) == (1.0, 0.0)

    def test_unknown_strategy_rejected(self):
        pp = PurePursuitController()
        with pytest.raises(SwitchingError):
            simplex_compute(_input(0.0, 0.0), pp, pp, _box_safe_set(), SwitchState(), "eager")

    def test_controller_wrapper(self):
        controller = SimplexController(UnsafeTracker(), PurePursuitController(), _box_safe_set())
        assert controller.name == "simplex-unsafe"
        inp = _input(0.8, 0.0)
        state = controller.initial_state(inp.frame)
        assert state.mode is HA
        cmd, mode, _ = controller.step(inp, state)
        assert mode is HA
        assert cmd == PurePursuitController().compute(inp)


class TestTrace:
    def test_replay_matches_stepwise_decisions(self):
        safe_set = _box_safe_set(dwell_time=0.2)
        frames = [OUTSIDE, INSIDE, INSIDE, INSIDE, INSIDE, INSIDE, OUTSIDE, INSIDE]
        times = [0.05 * k for k in range(len(frames))]
        modes = replay_modes(frames, times, safe_set)
        assert modes == [HA, HA, HA, HA, HP, HP, HA, HA]

    def test_replay_length_mismatch_rejected(self):
        with pytest.raises(ValueError):
            replay_modes([INSIDE, INSIDE], [0.0], _box_safe_set())

    def test_write_mode_trace(self):
        rows = [
            _Row(0.0, HP, 0.01, 0.0, 0.8, 0.1),
            _Row(0.05, HA, 0.6, 0.2, 0.5, -0.5),
        ]
        buffer = io.StringIO()
        write_mode_trace(rows, buffer)
        buffer.seek(0)
        frame = pd.read_csv(buffer)
        assert list(frame.columns) == TRACE_COLUMNS
        assert list(frame["mode"]) == ["PERFORMANCE", "ASSURANCE"]
        assert frame["omega"].iloc[1] == -0.5
