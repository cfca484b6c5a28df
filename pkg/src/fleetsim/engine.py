"""The deterministic tick loop wiring every module together.

Each control tick runs seven phases in a fixed order: task arrivals, queue
transactions, replanning, cluster formation, control synthesis, physics
integration, and arrival/deadline bookkeeping. All iteration is in robot-id
(or leader-id) order, so a scenario plus seed fully determines the trace.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field, replace

from . import trace as tr
from .coordination import ClusterPartition, elect_leaders, form_clusters, neighbor_sets
from .dynamics import (
    Control,
    HumanState,
    RobotState,
    SocialForceParams,
    step_human,
    step_robot,
)
from .navigation import (
    ARRIVE,
    QUEUE_WAIT,
    RoomQueue,
    WaypointPlan,
    expand_actions,
    on_queue_position,
    point_in_polygon,
    record_arrival,
)
from .planner import Path, PlanningError, lookahead_point, plan as plan_path
from .safety import (
    INFEASIBLE_FALLBACK,
    ControllerParams,
    nominal_leader,
    nominal_stop,
    solve_cluster_qp,
    solve_single_qp,
)
from .scenario import Scenario
from .tasking import Dispatcher
from .trace import Trace
from .world import raycast

import numpy as np


@dataclass
class RunResult:
    """A finished run: the trace plus wall-clock measurements kept out of it."""

    trace: Trace
    sim_time: float
    wall_time: float
    qp_samples: list[tuple[int, float]] = field(default_factory=list)

    @property
    def realtime_factor(self) -> float:
        return self.sim_time / self.wall_time if self.wall_time > 0 else math.inf


class _Robot:
    """Mutable per-robot runtime state."""

    def __init__(self, spec) -> None:
        self.spec = spec
        self.rid: int = spec.robot_id
        self.state = RobotState(spec.start[0], spec.start[1], spec.heading, 0.0)
        self.plan = WaypointPlan(spec.robot_id)
        self.path: Path | None = None
        self.path_target: tuple[float, float] | None = None
        self.last_plan_time = -math.inf
        self.ref_location: int | None = None
        self.queue_room: int | None = None
        self.queue_index: int | None = None
        self.fault: str | None = None
        self.control = Control(0.0, 0.0)

    def position(self) -> tuple[float, float]:
        return (self.state.x, self.state.y)


def _clip(value: float, limit: float) -> float:
    return min(max(value, -limit), limit)


def _plan_through(costmap, position, targets, cost_weight: float) -> Path:
    """Chain grid plans through the targets, pinning each target exactly.

    Grid paths end on cell centers, which can sit farther from the true
    target than the arrival tolerance; appending the exact coordinates keeps
    the pure-pursuit controller converging onto the real waypoint.
    """
    points: list[tuple[float, float]] = []
    total = 0.0
    at = position
    for target in targets:
        seg = plan_path(costmap, at, target, cost_weight)
        pts = list(seg.points)
        if points and pts and math.dist(points[-1], pts[0]) < 1e-9:
            pts = pts[1:]
        points.extend(pts)
        if math.dist(points[-1], target) > 1e-9:
            points.append((target[0], target[1]))
        total += seg.total_cost
        at = target
    return Path(tuple(points), total)


def _stop_control(state: RobotState, p: ControllerParams) -> Control:
    nom = nominal_stop(state, p)
    return Control(_clip(nom.a, p.a_max), 0.0)


class _Engine:
    def __init__(self, scenario: Scenario, include_timing: bool) -> None:
        self.s = scenario
        self.include_timing = include_timing
        self.net = scenario.roadways
        self.queues: dict[int, RoomQueue] = scenario.build_queues()
        self.dispatcher = (
            Dispatcher(scenario.travel_graph) if scenario.travel_graph else None
        )
        self.robots = {spec.robot_id: _Robot(spec) for spec in scenario.robots}
        self.robot_ids = sorted(self.robots)
        for rt in self.robots.values():
            if scenario.locations:
                rt.ref_location = self.net.nearest_location(rt.position())
        self.humans = [
            HumanState(
                position=np.array(h.start, dtype=float),
                velocity=np.zeros(2),
                goal_waypoints=list(h.waypoints),
            )
            for h in scenario.humans
        ]
        self.sf_params = [
            SocialForceParams(
                v_desired=h.v_desired,
                r_robot=scenario.robots[0].params.r_robot,
            )
            for h in scenario.humans
        ]
        self.events: list[dict] = []
        self.qp_samples: list[tuple[int, float]] = []
        self.now = 0.0

    # ------------------------------------------------------------------
    # helpers

    def emit(self, record: dict) -> None:
        self.events.append(record)

    def _fault(self, rt: _Robot, message: str) -> None:
        rt.fault = message
        rt.plan = replace(rt.plan, pending=[], labels=[])
        rt.path = None
        rt.control = Control(0.0, 0.0)
        self.emit({"type": tr.FAULT, "t": self.now, "robot": rt.rid, "error": message})

    def _first_labeled(self, rt: _Robot) -> tuple[str, int] | None:
        for label in rt.plan.labels:
            if label is not None:
                return label
        return None

    def _room_engaged(self, rt: _Robot, room: int) -> bool:
        """The robot's current leg still targets this room."""
        head = self._first_labeled(rt)
        return head is not None and head[1] == room

    def _next_queue_room(self, rt: _Robot) -> int | None:
        head = self._first_labeled(rt)
        if head is not None and head[0] == QUEUE_WAIT:
            return head[1]
        return None

    def _waiting_in_queue(self, rt: _Robot) -> bool:
        if not rt.plan.pending or not rt.plan.labels:
            return False
        label = rt.plan.labels[0]
        if label is None or label[0] != QUEUE_WAIT:
            return False
        return (
            math.dist(rt.position(), rt.plan.pending[0]) <= 2.0 * rt.spec.params.d_arrive
        )

    def _is_active(self, rt: _Robot) -> bool:
        return bool(rt.plan.pending) and not rt.fault and not self._waiting_in_queue(rt)

    def _rebuild_plan(self, rid: int) -> None:
        rt = self.robots[rid]
        if rt.fault or self.dispatcher is None:
            return
        actions = [leg.location for leg in self.dispatcher.robot_legs.get(rid, [])]
        new_plan = expand_actions(actions, self.net, rt.position(), self.queues, rid)
        rt.plan = replace(new_plan, arrivals=rt.plan.arrivals)
        rt.path = None
        rt.path_target = None
        if rt.queue_room is not None and self._room_engaged(rt, rt.queue_room):
            q = self.queues[rt.queue_room]
            idx = q.index_of(rid)
            if idx is not None:
                rt.plan = on_queue_position(rt.plan, q, idx)
                rt.queue_index = idx

    # ------------------------------------------------------------------
    # tick phases

    def phase_arrivals(self, stream_pos: int) -> int:
        stream = self.s.task_stream
        while (
            self.dispatcher is not None
            and stream_pos < len(stream)
            and stream[stream_pos].arrival <= self.now + 1e-9
        ):
            req = stream[stream_pos]
            stream_pos += 1
            locs = {rid: self.robots[rid].ref_location for rid in self.robot_ids}
            result = self.dispatcher.dispatch(req, locs, self.now)
            for ev in result.events:
                record = {"type": tr.TASK, "t": self.now}
                record.update(ev)
                self.emit(record)
            for rid in sorted(result.changed_robots):
                self._rebuild_plan(rid)
        return stream_pos

    def _queue_event(self, q: RoomQueue, event: str, robot: int, index) -> None:
        self.emit({
            "type": tr.QUEUE, "t": self.now, "room": q.room_id, "event": event,
            "robot": robot, "index": index,
            "occupants": list(q.occupants), "holder": q.holder,
        })

    def _doorway_clear(self, q: RoomQueue, rid: int) -> bool:
        """The approach corridor between queue line and room is free.

        Entering while an outgoing robot is still in the corridor ends with
        the safety filter shoving it backwards into the room. Robots waiting
        in this queue stand on off-corridor slots and do not count.
        """
        room_pos = self.s.locations[q.room_id]
        clearance = max(
            self.s.world.release_distance,
            math.dist(room_pos, q.slots[-1]),
        )
        ignore = {rid, *q.occupants}
        return all(
            other in ignore
            or math.dist(self.robots[other].position(), room_pos) > clearance
            for other in self.robot_ids
        )

    def _try_grant(self, rid: int) -> None:
        """Send the queue holder into the room once the doorway is clear."""
        rt = self.robots[rid]
        if rt.queue_room is None:
            return
        q = self.queues[rt.queue_room]
        if q.holder != rid:
            return
        head = self._first_labeled(rt)
        if head != (QUEUE_WAIT, q.room_id):
            return
        if not self._doorway_clear(q, rid):
            return
        rt.plan = on_queue_position(rt.plan, q, 0)
        rt.queue_index = 0
        rt.path = None  # retarget into the room
        self._queue_event(q, "grant", rid, 0)

    def phase_queues(self) -> None:
        for rid in self.robot_ids:
            rt = self.robots[rid]
            if rt.fault:
                continue
            pos = rt.position()
            if rt.queue_room is not None:
                q = self.queues[rt.queue_room]
                idx = q.index_of(rid)
                if idx is None:
                    rt.queue_room = None
                    rt.queue_index = None
                elif not self._room_engaged(rt, rt.queue_room):
                    room = rt.queue_room
                    spec = self.s.rooms[room]
                    inside = point_in_polygon(pos, list(spec.polygon))
                    no_tasks = self.dispatcher is None or not self.dispatcher.has_tasks(rid)
                    reassigned = q.holder != rid
                    exhausted = (no_tasks and not inside) or reassigned
                    released = q.release(
                        rid, pos, self.s.locations[room],
                        self.s.world.release_distance,
                        tasks_exhausted=exhausted,
                    )
                    if released:
                        rt.queue_room = None
                        rt.queue_index = None
                        self._queue_event(q, "release", rid, None)
            if rt.queue_room is not None:
                q = self.queues[rt.queue_room]
                idx = q.index_of(rid)
                if (
                    idx is not None and idx != rt.queue_index
                    and q.holder != rid  # holders advance via _try_grant
                ):
                    rt.plan = on_queue_position(rt.plan, q, idx)
                    rt.queue_index = idx
                    self._queue_event(q, "position", rid, idx)
            if rt.queue_room is None:
                room = self._next_queue_room(rt)
                if room is not None:
                    q = self.queues[room]
                    room_pos = self.s.locations[room]
                    threshold = self.s.world.queue_request_factor * math.dist(
                        q.slots[-1], room_pos
                    )
                    if math.dist(pos, room_pos) <= threshold:
                        idx = q.request_slot(rid)
                        if idx is None:
                            self._queue_event(q, "full", rid, None)
                        else:
                            rt.queue_room = room
                            rt.queue_index = idx
                            self._queue_event(q, "request", rid, idx)
                            if q.holder != rid:
                                rt.plan = on_queue_position(rt.plan, q, idx)
            self._try_grant(rid)

    def phase_replan(self) -> None:
        for rid in self.robot_ids:
            rt = self.robots[rid]
            if rt.fault or not rt.plan.pending:
                rt.path = None
                rt.path_target = None
                continue
            if self._waiting_in_queue(rt):
                continue
            target = rt.plan.pending[0]
            expired = self.now - rt.last_plan_time >= self.s.replan_period - 1e-9
            if rt.path is not None and rt.path_target == target and not expired:
                continue
            try:
                rt.path = _plan_through(
                    self.s.costmap, rt.position(), rt.plan.next_two(),
                    self.s.world.cost_weight,
                )
                rt.path_target = target
                rt.last_plan_time = self.now
                self.emit({
                    "type": tr.PLAN, "t": self.now, "robot": rid,
                    "from": [rt.state.x, rt.state.y],
                    "to": [target[0], target[1]],
                    "status": "ok", "cost": rt.path.total_cost,
                    "points": [[x, y] for x, y in rt.path.points],
                })
            except PlanningError as exc:
                self.emit({
                    "type": tr.PLAN, "t": self.now, "robot": rid,
                    "from": [rt.state.x, rt.state.y],
                    "to": [target[0], target[1]],
                    "status": "error", "cost": None, "points": [],
                })
                self._fault(rt, f"planner: {exc}")

    def phase_clusters(self) -> ClusterPartition:
        positions = {rid: self.robots[rid].position() for rid in self.robot_ids}
        partition = form_clusters(neighbor_sets(positions, self.s.world.d_neighbor))
        active = {rid for rid in self.robot_ids if self._is_active(self.robots[rid])}
        partition = elect_leaders(partition, active)
        self.emit({
            "type": tr.STATE, "t": self.now,
            "robots": [
                [rid, self.robots[rid].state.x, self.robots[rid].state.y,
                 self.robots[rid].state.theta, self.robots[rid].state.v]
                for rid in self.robot_ids
            ],
            "humans": [
                [float(h.position[0]), float(h.position[1]),
                 float(h.velocity[0]), float(h.velocity[1])]
                for h in self.humans
            ],
        })
        self.emit({
            "type": tr.CLUSTERS, "t": self.now,
            "clusters": [
                [c.leader, list(c.members), list(c.active_members), c.all_stop]
                for c in partition.clusters
            ],
        })
        return partition

    def _leader_nominal(self, rt: _Robot) -> Control:
        if rt.path is not None:
            waypoint = lookahead_point(rt.path, rt.position(), rt.spec.params.delta)
        elif rt.plan.pending:
            waypoint = rt.plan.pending[0]
        else:
            return nominal_stop(rt.state, rt.spec.params)
        return nominal_leader(rt.state, waypoint, rt.spec.params)

    def phase_controls(self, partition: ClusterPartition) -> None:
        decided: dict[int, Control] = {}
        for cluster in sorted(partition.clusters, key=lambda c: c.leader):
            members = list(cluster.members)
            if cluster.all_stop:
                for m in members:
                    rt = self.robots[m]
                    decided[m] = _stop_control(rt.state, rt.spec.params)
                continue
            leader = cluster.leader
            params = self.robots[leader].spec.params
            states = {m: self.robots[m].state for m in members}
            nominals = {}
            for m in members:
                if m == leader:
                    nominals[m] = self._leader_nominal(self.robots[m])
                else:
                    nominals[m] = nominal_stop(states[m], self.robots[m].spec.params)
            obstacle_points = {
                m: raycast(
                    self.s.grid, states[m].x, states[m].y, states[m].theta,
                    self.s.world.n_rays, self.s.world.max_range,
                )
                for m in members
            }
            t0 = time.perf_counter()
            if len(members) == 1:
                decision = solve_single_qp(
                    states[leader], nominals[leader], obstacle_points[leader],
                    self.humans, params, robot_id=leader,
                )
            else:
                decision = solve_cluster_qp(
                    members, states, nominals, obstacle_points, self.humans, params
                )
            elapsed = time.perf_counter() - t0
            self.qp_samples.append((len(members), elapsed))
            for m in members:
                decided[m] = decision.controls[m]
            record = {
                "type": tr.QP, "t": self.now, "leader": leader,
                "members": members, "status": decision.qp_status,
                "max_slack": max(decision.slack_used, default=0.0),
                "rows": len(decision.slack_used),
            }
            if self.include_timing:
                record["duration"] = elapsed
            self.emit(record)
        for rid in self.robot_ids:
            rt = self.robots[rid]
            rt.control = decided.get(rid, Control(0.0, 0.0))
        self.emit({
            "type": tr.CONTROL, "t": self.now,
            "robots": [
                [rid, self.robots[rid].control.a, self.robots[rid].control.omega]
                for rid in self.robot_ids
            ],
        })

    def phase_integrate(self) -> None:
        n_sub = round(self.s.control_period / self.s.tick_dt)
        human_obstacles = []
        for h in self.humans:
            speed = math.hypot(float(h.velocity[0]), float(h.velocity[1]))
            heading = (
                math.atan2(float(h.velocity[1]), float(h.velocity[0]))
                if speed > 1e-9 else 0.0
            )
            if self.s.grid.in_bounds(float(h.position[0]), float(h.position[1])):
                hits = raycast(
                    self.s.grid, float(h.position[0]), float(h.position[1]),
                    heading, self.s.world.n_rays, self.s.world.max_range,
                ).hit_points()
            else:
                hits = []
            human_obstacles.append(hits)
        for _ in range(n_sub):
            robot_positions = [self.robots[rid].position() for rid in self.robot_ids]
            for rid in self.robot_ids:
                rt = self.robots[rid]
                try:
                    rt.state = step_robot(
                        rt.state, rt.control, self.s.tick_dt, rt.spec.params.v_max
                    )
                except ValueError as exc:
                    self._fault(rt, f"dynamics: {exc}")
            if self.humans:
                updated = []
                for i, h in enumerate(self.humans):
                    others = self.humans[:i] + self.humans[i + 1:]
                    updated.append(step_human(
                        h, robot_positions, others, human_obstacles[i],
                        self.s.tick_dt, self.sf_params[i],
                    ))
                self.humans = updated

    def phase_bookkeeping(self) -> None:
        for rid in self.robot_ids:
            rt = self.robots[rid]
            if rt.fault:
                continue
            if rt.plan.pending:
                target = rt.plan.pending[0]
                label = rt.plan.labels[0]
                is_wait = label is not None and label[0] == QUEUE_WAIT
                if not is_wait and math.dist(rt.position(), target) <= rt.spec.params.d_arrive:
                    rt.plan = record_arrival(rt.plan, target, self.now)
                    rt.plan = replace(
                        rt.plan,
                        pending=rt.plan.pending[1:],
                        labels=rt.plan.labels[1:],
                    )
                    rt.path = None
                    rt.path_target = None
                    self.emit({
                        "type": tr.ARRIVAL, "t": self.now, "robot": rid,
                        "waypoint": [target[0], target[1]],
                    })
                    if self.dispatcher is not None:
                        self.dispatcher.record_feedback(rid, target, self.now)
                    if label is not None and label[0] == ARRIVE:
                        rt.ref_location = label[1]
                        if self.dispatcher is not None:
                            leg = self.dispatcher.current_leg(rid)
                            if leg is not None and leg.location == label[1]:
                                _, evs = self.dispatcher.complete_leg(rid, self.now)
                                for ev in evs:
                                    record = {"type": tr.TASK, "t": self.now}
                                    record.update(ev)
                                    self.emit(record)
            if not rt.plan.pending and (
                self.dispatcher is None or not self.dispatcher.has_tasks(rid)
            ):
                self._route_out_of_rooms(rt)
        if self.dispatcher is not None:
            for ev in self.dispatcher.check_deadlines(self.now):
                record = {"type": tr.TASK, "t": self.now}
                record.update(ev)
                self.emit(record)

    def _route_out_of_rooms(self, rt: _Robot) -> None:
        """An idle robot standing inside a room walks out past the queue line."""
        pos = rt.position()
        for loc, spec in sorted(self.s.rooms.items()):
            if not point_in_polygon(pos, list(spec.polygon)):
                continue
            room_pos = self.s.locations[loc]
            back = spec.queue_slots[-1]
            direction = (back[0] - room_pos[0], back[1] - room_pos[1])
            norm = math.hypot(*direction)
            if norm < 1e-9:
                direction, norm = (1.0, 0.0), 1.0
            exit_point = (
                back[0] + direction[0] / norm,
                back[1] + direction[1] / norm,
            )
            rt.plan = replace(rt.plan, pending=[exit_point], labels=[None])
            rt.path = None
            rt.path_target = None
            return

    # ------------------------------------------------------------------

    def header(self) -> dict:
        s = self.s
        return {
            "type": tr.HEADER,
            "version": 1,
            "digest": s.digest,
            "seed": s.seed,
            "tick_dt": s.tick_dt,
            "control_period": s.control_period,
            "replan_period": s.replan_period,
            "duration": s.duration,
            "timing": self.include_timing,
            "map": {
                "width": s.grid.width,
                "height": s.grid.height,
                "resolution": s.grid.resolution,
                "origin_x": s.grid.origin_x,
                "origin_y": s.grid.origin_y,
                "text": s.map_text,
            },
            "robots": [
                {
                    "id": spec.robot_id, "name": spec.name,
                    "x": spec.start[0], "y": spec.start[1],
                    "heading": spec.heading,
                    "r_robot": spec.params.r_robot,
                    "r_safe": spec.params.r_safe,
                }
                for spec in s.robots
            ],
            "humans": [
                {"x": h.start[0], "y": h.start[1]} for h in s.humans
            ],
            "locations": [
                [loc, s.locations[loc][0], s.locations[loc][1]]
                for loc in sorted(s.locations)
            ],
            "rooms": [
                {
                    "location": spec.location,
                    "polygon": [[x, y] for x, y in spec.polygon],
                    "queue_slots": [[x, y] for x, y in spec.queue_slots],
                }
                for spec in (s.rooms[k] for k in sorted(s.rooms))
            ],
            "params": {
                "d_neighbor": s.world.d_neighbor,
                "n_rays": s.world.n_rays,
                "max_range": s.world.max_range,
                "cost_weight": s.world.cost_weight,
                "inflation_radius": s.world.inflation_radius,
                "cost_scale": s.world.cost_scale,
                "release_distance": s.world.release_distance,
                "queue_request_factor": s.world.queue_request_factor,
                "r_human": s.robots[0].params.r_human if s.robots else 0.35,
            },
        }

    def run(self) -> RunResult:
        wall_start = time.perf_counter()
        n_ticks = int(math.floor(self.s.duration / self.s.control_period + 1e-9))
        stream_pos = 0
        for k in range(n_ticks):
            self.now = k * self.s.control_period
            stream_pos = self.phase_arrivals(stream_pos)
            self.phase_queues()
            self.phase_replan()
            partition = self.phase_clusters()
            self.phase_controls(partition)
            self.phase_integrate()
            self.phase_bookkeeping()
        sim_time = n_ticks * self.s.control_period
        if n_ticks > 0:
            self.now = sim_time
            self.emit({
                "type": tr.STATE, "t": self.now,
                "robots": [
                    [rid, self.robots[rid].state.x, self.robots[rid].state.y,
                     self.robots[rid].state.theta, self.robots[rid].state.v]
                    for rid in self.robot_ids
                ],
                "humans": [
                    [float(h.position[0]), float(h.position[1]),
                     float(h.velocity[0]), float(h.velocity[1])]
                    for h in self.humans
                ],
            })
            end_record = {"type": tr.END, "t": self.now, "ticks": n_ticks}
            if self.include_timing:
                end_record["wall_time"] = time.perf_counter() - wall_start
            self.emit(end_record)
        wall = time.perf_counter() - wall_start
        return RunResult(
            trace=Trace(self.header(), self.events),
            sim_time=sim_time,
            wall_time=wall,
            qp_samples=self.qp_samples,
        )


def run(scenario: Scenario, include_timing: bool = False) -> RunResult:
    """Execute a scenario to completion and return its trace.

    ``include_timing`` adds wall-clock solve durations to trace events; they
    vary run to run, so the byte-determinism guarantee only covers traces
    written without it.
    """
    return _Engine(scenario, include_timing).run()


def measure_travel_time(
    scenario: Scenario, loc_a: int, loc_b: int, timeout: float = 600.0
) -> float:
    """Simulated seconds for one robot to travel between two locations.

    Runs the single-robot stack (roadway expansion, planning, nominal control,
    CBF-QP, RK4) from location ``loc_a`` until arrival at ``loc_b``.
    """
    if loc_a not in scenario.locations or loc_b not in scenario.locations:
        missing = loc_a if loc_a not in scenario.locations else loc_b
        raise KeyError(f"unknown location {missing}")
    if loc_a == loc_b:
        return 0.0
    spec = scenario.robots[0]
    params = spec.params
    world = scenario.world
    start = scenario.locations[loc_a]
    state = RobotState(start[0], start[1], 0.0, 0.0)
    wp_plan = expand_actions([loc_b], scenario.roadways, start, {}, spec.robot_id)
    pending = list(wp_plan.pending)
    path: Path | None = None
    path_target = None
    last_plan = -math.inf
    now = 0.0
    n_sub = round(scenario.control_period / scenario.tick_dt)
    while now <= timeout:
        if not pending:
            return now
        target = pending[0]
        if path is None or path_target != target or now - last_plan >= scenario.replan_period - 1e-9:
            try:
                path = _plan_through(
                    scenario.costmap, (state.x, state.y), pending[:2],
                    world.cost_weight,
                )
            except PlanningError as exc:
                raise PlanningError(
                    f"pair ({loc_a}, {loc_b}) unreachable: {exc}"
                ) from None
            path_target = target
            last_plan = now
        waypoint = lookahead_point(path, (state.x, state.y), params.delta)
        nominal = nominal_leader(state, waypoint, params)
        hits = raycast(
            scenario.grid, state.x, state.y, state.theta,
            world.n_rays, world.max_range,
        )
        decision = solve_single_qp(state, nominal, hits, [], params, spec.robot_id)
        control = decision.controls[spec.robot_id]
        for _ in range(n_sub):
            state = step_robot(state, control, scenario.tick_dt, params.v_max)
        now += scenario.control_period
        if math.dist((state.x, state.y), pending[0]) <= params.d_arrive:
            pending.pop(0)
            path = None
            path_target = None
    raise PlanningError(
        f"pair ({loc_a}, {loc_b}): no arrival within {timeout} simulated seconds"
    )
