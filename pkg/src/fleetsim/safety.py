"""Per-tick control synthesis: nominal laws plus the CBF-QP safety filter.

Safety constraints use a squared-distance barrier h = |dp|^2 - r^2 with a
second-order condition (position constraints have relative degree 2 under
acceleration control):

    hddot + (alpha1 + alpha2) * hdot + alpha1 * alpha2 * h >= -s

hddot is linear in the stacked controls of a dynamic unicycle, so each
constraint is one linear row of the QP. Solving is two-phase: the hard QP
first (slack identically zero when it succeeds), then a slack-penalized QP
only when the hard problem is infeasible; if even that fails the decision
falls back to stop controls for every member.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import Control, HumanState, RobotState, wrap_angle
from .qp import OPTIMAL, solve_qp
from .world import ObstaclePointSet

FEASIBLE = "feasible"
FEASIBLE_WITH_SLACK = "feasible-with-slack"
INFEASIBLE_FALLBACK = "infeasible-fallback"


@dataclass(frozen=True)
class ControllerParams:
    k_v: float = 1.0
    k_theta: float = 2.0
    k_slow: float = -2.0
    theta_bar: float = math.pi / 4
    v_max: float = 1.0
    a_max: float = 2.0
    omega_max: float = 2.0
    delta: float = 0.5
    d_arrive: float = 0.3
    r_robot: float = 0.3
    r_safe: float = 0.8
    alpha1: float = 1.5
    alpha2: float = 1.5
    slack_penalty: float = 1e4
    r_human: float = 0.35

    def __post_init__(self) -> None:
        positive = {
            "k_v": self.k_v, "k_theta": self.k_theta, "v_max": self.v_max,
            "a_max": self.a_max, "omega_max": self.omega_max, "delta": self.delta,
            "d_arrive": self.d_arrive, "r_robot": self.r_robot,
            "alpha1": self.alpha1, "alpha2": self.alpha2,
            "slack_penalty": self.slack_penalty, "r_human": self.r_human,
        }
        for name, value in positive.items():
            if not value > 0:
                raise ValueError(f"{name} must be positive, got {value}")
        if not self.k_slow < 0:
            raise ValueError(f"k_slow must be negative, got {self.k_slow}")
        if not 0 < self.theta_bar < math.pi:
            raise ValueError(f"theta_bar must lie in (0, pi), got {self.theta_bar}")
        if self.r_safe < 2 * self.r_robot:
            raise ValueError("r_safe must be at least 2 * r_robot")

    @property
    def r_obstacle(self) -> float:
        """Center-to-obstacle-point keepout: robot radius plus the pair margin."""
        return self.r_safe - self.r_robot

    @property
    def r_human_safe(self) -> float:
        """Center-to-human keepout: both radii plus the pair margin."""
        return self.r_safe - self.r_robot + self.r_human


@dataclass(frozen=True)
class ControlDecision:
    controls: dict[int, Control]
    slack_used: list[float] = field(default_factory=list)
    qp_status: str = FEASIBLE


def nominal_stop(state: RobotState, p: ControllerParams) -> Control:
    """Braking law: decelerate proportionally to speed, no turning."""
    a = min(max(p.k_slow * state.v, -p.v_max), p.v_max)
    return Control(a, 0.0)


def nominal_leader(state: RobotState, waypoint: tuple[float, float], p: ControllerParams) -> Control:
    """Waypoint-seeking law for a cluster leader (or a lone robot).

    Aligns the heading at gain k_theta and regulates speed toward
    v* = clamp(k_v * d * cos(theta_hat), 0, v_max). Large heading error turns
    in place; arrival inside d_arrive hands over to the stop law. The output
    is unclamped, the QP box bounds enforce actuator limits.
    """
    dx = waypoint[0] - state.x
    dy = waypoint[1] - state.y
    d = math.hypot(dx, dy)
    if d < p.d_arrive:
        return nominal_stop(state, p)
    theta_hat = wrap_angle(math.atan2(dy, dx) - state.theta)
    if abs(theta_hat) > p.theta_bar:
        return Control(0.0, p.k_theta * theta_hat)
    v_star = max(0.0, min(p.k_v * d * math.cos(theta_hat), p.v_max))
    return Control(p.k_v * (v_star - state.v), p.k_theta * theta_hat)


@dataclass(frozen=True)
class BarrierTerms:
    """One second-order barrier row: h, hdot, the control-free part of hddot,
    and hddot's linear coefficients on each involved robot's (a, omega)."""

    h: float
    hdot: float
    c0: float
    coef_i: tuple[float, float]
    coef_j: tuple[float, float] | None = None


def pair_barrier(s_i: RobotState, s_j: RobotState, r: float) -> BarrierTerms:
    """Barrier terms for two unicycles keeping center distance at least r."""
    e_i = np.array([math.cos(s_i.theta), math.sin(s_i.theta)])
    e_j = np.array([math.cos(s_j.theta), math.sin(s_j.theta)])
    n_i = np.array([-e_i[1], e_i[0]])
    n_j = np.array([-e_j[1], e_j[0]])
    dp = np.array([s_i.x - s_j.x, s_i.y - s_j.y])
    dv = s_i.v * e_i - s_j.v * e_j
    h = float(dp @ dp) - r * r
    hdot = 2.0 * float(dp @ dv)
    c0 = 2.0 * float(dv @ dv)
    coef_i = (2.0 * float(dp @ e_i), 2.0 * s_i.v * float(dp @ n_i))
    coef_j = (-2.0 * float(dp @ e_j), -2.0 * s_j.v * float(dp @ n_j))
    return BarrierTerms(h, hdot, c0, coef_i, coef_j)


def point_barrier(
    s_i: RobotState,
    point: tuple[float, float],
    velocity: tuple[float, float],
    r: float,
) -> BarrierTerms:
    """Barrier terms against a point moving at constant velocity
    (static obstacles pass (0, 0))."""
    e_i = np.array([math.cos(s_i.theta), math.sin(s_i.theta)])
    n_i = np.array([-e_i[1], e_i[0]])
    dp = np.array([s_i.x - point[0], s_i.y - point[1]])
    dv = s_i.v * e_i - np.asarray(velocity, dtype=float)
    h = float(dp @ dp) - r * r
    hdot = 2.0 * float(dp @ dv)
    c0 = 2.0 * float(dv @ dv)
    coef_i = (2.0 * float(dp @ e_i), 2.0 * s_i.v * float(dp @ n_i))
    return BarrierTerms(h, hdot, c0, coef_i)


def _assemble(
    members: list[int],
    states: dict[int, RobotState],
    obstacle_points: dict[int, ObstaclePointSet],
    humans: list[HumanState],
    p: ControllerParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Stack all CBF rows into (A, b) with A @ u >= b over stacked controls."""
    n = len(members)
    slot = {rid: 2 * k for k, rid in enumerate(members)}
    rows: list[np.ndarray] = []
    rhs: list[float] = []

    def add(terms: BarrierTerms, rid_i: int, rid_j: int | None = None) -> None:
        row = np.zeros(2 * n)
        row[slot[rid_i]: slot[rid_i] + 2] = terms.coef_i
        if rid_j is not None and terms.coef_j is not None:
            row[slot[rid_j]: slot[rid_j] + 2] = terms.coef_j
        gain = p.alpha1 + p.alpha2
        rows.append(row)
        rhs.append(-terms.c0 - gain * terms.hdot - p.alpha1 * p.alpha2 * terms.h)

    for a_idx in range(n):
        for b_idx in range(a_idx + 1, n):
            i, j = members[a_idx], members[b_idx]
            add(pair_barrier(states[i], states[j], p.r_safe), i, j)
    for rid in members:
        pts = obstacle_points.get(rid)
        if pts is not None:
            for pt in pts.points:
                if pt is not None:
                    add(point_barrier(states[rid], pt, (0.0, 0.0), p.r_obstacle), rid)
    for rid in members:
        for hum in humans:
            pt = (float(hum.position[0]), float(hum.position[1]))
            vel = (float(hum.velocity[0]), float(hum.velocity[1]))
            add(point_barrier(states[rid], pt, vel, p.r_human_safe), rid)
    if rows:
        return np.vstack(rows), np.array(rhs)
    return np.zeros((0, 2 * n)), np.zeros(0)


def _box_rows(n_vars: int, n_robots: int, p: ControllerParams) -> tuple[np.ndarray, np.ndarray]:
    rows = []
    rhs = []
    for k in range(n_robots):
        for var, limit in ((2 * k, p.a_max), (2 * k + 1, p.omega_max)):
            up = np.zeros(n_vars)
            up[var] = -1.0
            rows.append(up)
            rhs.append(-limit)
            lo = np.zeros(n_vars)
            lo[var] = 1.0
            rows.append(lo)
            rhs.append(-limit)
    return np.vstack(rows), np.array(rhs)


def _clip(value: float, limit: float) -> float:
    return min(max(value, -limit), limit)


def solve_cluster_qp(
    members: list[int],
    states: dict[int, RobotState],
    nominals: dict[int, Control],
    obstacle_points: dict[int, ObstaclePointSet],
    humans: list[HumanState],
    p: ControllerParams,
) -> ControlDecision:
    """Filter the cluster's nominal controls through the joint CBF-QP.

    Minimizes sum |u_i - u_i*|^2 subject to every pairwise, obstacle and
    human barrier row plus control box bounds. Falls back to a slack-penalized
    problem (penalty slack_penalty * s^2 per row) when the hard QP is
    infeasible, and to stop controls for everyone when even that fails.
    """
    if not members:
        raise ValueError("empty cluster")
    for rid in members:
        st = states[rid]
        nom = nominals[rid]
        if not all(math.isfinite(u) for u in (st.x, st.y, st.theta, st.v, nom.a, nom.omega)):
            raise ValueError(f"non-finite state or nominal for robot {rid}")

    n = len(members)
    u_star = np.empty(2 * n)
    for k, rid in enumerate(members):
        u_star[2 * k] = nominals[rid].a
        u_star[2 * k + 1] = nominals[rid].omega

    A_cbf, b_cbf = _assemble(members, states, obstacle_points, humans, p)
    m = A_cbf.shape[0]
    A_box, b_box = _box_rows(2 * n, n, p)

    hard = solve_qp(
        np.eye(2 * n) * 2.0,
        -2.0 * u_star,
        np.vstack([A_cbf, A_box]),
        np.concatenate([b_cbf, b_box]),
    )
    if hard.status == OPTIMAL:
        return ControlDecision(
            _unpack(members, hard.x, p), [0.0] * m, FEASIBLE
        )

    # soft problem: append one slack variable per CBF row
    dim = 2 * n + m
    H = np.diag([2.0] * (2 * n) + [2.0 * p.slack_penalty] * m)
    g = np.concatenate([-2.0 * u_star, np.zeros(m)])
    A_soft = np.zeros((m, dim))
    A_soft[:, : 2 * n] = A_cbf
    A_soft[:, 2 * n:] = np.eye(m)
    A_nonneg = np.zeros((m, dim))
    A_nonneg[:, 2 * n:] = np.eye(m)
    A_box_soft = np.zeros((A_box.shape[0], dim))
    A_box_soft[:, : 2 * n] = A_box
    soft = solve_qp(
        H,
        g,
        np.vstack([A_soft, A_nonneg, A_box_soft]),
        np.concatenate([b_cbf, np.zeros(m), b_box]),
    )
    if soft.status == OPTIMAL:
        slack = [max(0.0, float(s)) for s in soft.x[2 * n:]]
        return ControlDecision(_unpack(members, soft.x, p), slack, FEASIBLE_WITH_SLACK)

    stops = {
        rid: Control(_clip(nominal_stop(states[rid], p).a, p.a_max), 0.0)
        for rid in members
    }
    return ControlDecision(stops, [], INFEASIBLE_FALLBACK)


def _unpack(members: list[int], x: np.ndarray, p: ControllerParams) -> dict[int, Control]:
    # clip away solver-tolerance overshoot so box bounds hold exactly
    return {
        rid: Control(_clip(float(x[2 * k]), p.a_max), _clip(float(x[2 * k + 1]), p.omega_max))
        for k, rid in enumerate(members)
    }


def solve_single_qp(
    state: RobotState,
    nominal: Control,
    obstacle_points: ObstaclePointSet,
    humans: list[HumanState],
    p: ControllerParams,
    robot_id: int = 0,
) -> ControlDecision:
    """Single-robot CBF-QP: obstacle and human constraints only."""
    return solve_cluster_qp(
        [robot_id],
        {robot_id: state},
        {robot_id: nominal},
        {robot_id: obstacle_points},
        humans,
        p,
    )
