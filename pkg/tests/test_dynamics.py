import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fleetsim.dynamics import (
    Control,
    HumanState,
    RobotState,
    SocialForceParams,
    step_human,
    step_robot,
    wrap_angle,
)

from _support import unicycle_closed_form


class TestWrapAngle:
    def test_boundaries(self):
        assert wrap_angle(0.0) == 0.0
        assert wrap_angle(math.pi) == math.pi
        assert wrap_angle(-math.pi) == math.pi
        assert wrap_angle(3.0 * math.pi) == pytest.approx(math.pi)

    @given(st.floats(-1e6, 1e6))
    def test_range(self, theta):
        w = wrap_angle(theta)
        assert -math.pi < w <= math.pi

    @given(st.floats(-10.0, 10.0), st.integers(-3, 3))
    def test_shift_invariance(self, theta, k):
        assert wrap_angle(theta + 2.0 * math.pi * k) == pytest.approx(
            wrap_angle(theta), abs=1e-9
        )


def test_state_helpers():
    s = RobotState(1.0, 2.0, math.pi / 2, 0.3)
    assert s.position() == (1.0, 2.0)
    hx, hy = s.heading_vector()
    assert (hx, hy) == pytest.approx((0.0, 1.0), abs=1e-12)


class TestStepRobot:
    def test_rejects_bad_dt(self):
        s = RobotState(0, 0, 0, 0)
        for dt in (0.0, -0.1):
            with pytest.raises(ValueError, match="dt"):
                step_robot(s, Control(0, 0), dt)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="finite"):
            step_robot(RobotState(0, 0, 0, 0), Control(math.nan, 0), 0.05)
        with pytest.raises(ValueError, match="finite"):
            step_robot(RobotState(math.inf, 0, 0, 0), Control(0, 0), 0.05)

    def test_straight_line(self):
        s = step_robot(RobotState(0, 0, 0, 0.5), Control(0, 0), 0.05)
        assert s.x == pytest.approx(0.025, abs=1e-15)
        assert s.y == 0.0 and s.theta == 0.0 and s.v == 0.5

    def test_single_substep_matches_closed_form(self):
        out = step_robot(RobotState(0.3, -0.2, 0.7, 0.4), Control(1.2, 1.5), 0.05, v_max=10.0)
        ex = unicycle_closed_form(0.3, -0.2, 0.7, 0.4, 1.2, 1.5, 0.05)
        assert (out.x, out.y, out.theta, out.v) == pytest.approx(ex, abs=1e-8)

    def test_long_step_splits_into_substeps(self):
        s0 = RobotState(0.1, 0.2, 0.3, 0.4)
        c = Control(0.5, -0.8)
        whole = step_robot(s0, c, 0.2, v_max=5.0)
        chained = s0
        for _ in range(4):
            chained = step_robot(chained, c, 0.05, v_max=5.0)
        assert (whole.x, whole.y, whole.theta, whole.v) == pytest.approx(
            (chained.x, chained.y, chained.theta, chained.v), abs=1e-12
        )

    def test_speed_clamped_each_substep(self):
        out = step_robot(RobotState(0, 0, 0, 0.5), Control(2.0, 0), 0.3, v_max=1.0)
        assert out.v == 1.0
        out = step_robot(RobotState(0, 0, 0, -0.5), Control(-2.0, 0), 0.3, v_max=1.0)
        assert out.v == -1.0

    def test_heading_wrapped(self):
        out = step_robot(RobotState(0, 0, 3.0, 0), Control(0, 2.0), 0.2)
        assert out.theta == pytest.approx(3.4 - 2.0 * math.pi)
        assert -math.pi < out.theta <= math.pi

    @given(
        st.floats(-2.0, 2.0), st.floats(-2.0, 2.0), st.floats(-3.0, 3.0),
        st.floats(-1.0, 1.0), st.floats(-2.0, 2.0), st.floats(-2.0, 2.0),
        st.floats(0.01, 0.5),
    )
    def test_bounds_always_hold(self, x, y, th, v, a, w, dt):
        out = step_robot(RobotState(x, y, th, v), Control(a, w), dt, v_max=1.0)
        assert -1.0 <= out.v <= 1.0
        assert -math.pi < out.theta <= math.pi


def _human(pos, vel=(0.0, 0.0), waypoints=(), index=0):
    return HumanState(
        np.array(pos, dtype=float), np.array(vel, dtype=float),
        list(waypoints), index,
    )


class TestStepHuman:
    def test_rejects_bad_dt(self):
        with pytest.raises(ValueError, match="dt"):
            step_human(_human((0, 0)), [], [], [], 0.0)

    def test_goal_attraction(self):
        p = SocialForceParams()
        out = step_human(_human((0, 0), waypoints=[(5.0, 0.0)]), [], [], [], 0.1, p)
        # force = (v_desired * xhat - 0) / tau = (2, 0)
        assert out.velocity == pytest.approx([0.2, 0.0])
        assert out.position == pytest.approx([0.02, 0.0])

    def test_no_goal_no_drift(self):
        out = step_human(_human((1.0, 1.0)), [], [], [], 0.1)
        assert out.velocity == pytest.approx([0.0, 0.0])
        assert out.position == pytest.approx([1.0, 1.0])

    def test_robot_repulsion_pushes_away(self):
        out = step_human(_human((0, 0)), [(0.3, 0.0)], [], [], 0.05)
        assert out.velocity[0] < 0
        assert out.velocity[1] == pytest.approx(0.0, abs=1e-12)

    def test_overlap_force_capped(self):
        p = SocialForceParams()
        out = step_human(_human((0, 0)), [(0.0, 0.0)], [], [], 0.05, p)
        # overlapping bodies push along +x at exactly the cap
        assert out.velocity == pytest.approx([p.force_cap * 0.05, 0.0])

    def test_each_source_kind_repels(self):
        d = (0.5, 0.0)
        by_robot = step_human(_human((0, 0)), [d], [], [], 0.05)
        by_human = step_human(_human((0, 0)), [], [_human(d)], [], 0.05)
        by_obstacle = step_human(_human((0, 0)), [], [], [d], 0.05)
        v_r = -by_robot.velocity[0]
        v_h = -by_human.velocity[0]
        v_o = -by_obstacle.velocity[0]
        assert v_r > 0 and v_h > 0 and v_o > 0
        # larger radius sum means stronger push at equal distance
        assert v_h > v_r > v_o

    def test_speed_cap(self):
        p = SocialForceParams()
        out = step_human(_human((0, 0), vel=(5.0, 0.0)), [], [], [], 0.1, p)
        speed = math.hypot(*out.velocity)
        assert speed == pytest.approx(p.max_speed_factor * p.v_desired)

    def test_waypoint_cycles(self):
        h = _human((0.9, 0.0), vel=(1.0, 0.0), waypoints=[(1.0, 0.0), (0.0, 0.0)])
        out = step_human(h, [], [], [], 0.1)
        assert out.current_goal_index == 1

    def test_single_waypoint_wraps_to_itself(self):
        h = _human((0.99, 0.0), vel=(1.0, 0.0), waypoints=[(1.0, 0.0)])
        out = step_human(h, [], [], [], 0.05)
        assert out.current_goal_index == 0
