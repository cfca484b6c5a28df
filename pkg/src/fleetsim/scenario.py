"""Scenario files: parsing, cross-reference validation, digesting.

A scenario is a YAML document naming a map file, the robot fleet (``agents``
mapping with per-robot ``start: [x, y]``), optional pedestrians, system
locations with roadway routes, rooms with access queues, a travel-time graph,
and the task stream (a JSON list of request batches with ``arrival`` and
``tasks`` entries). All file references are resolved relative to the scenario
file.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path as FsPath

import yaml

from .navigation import RoadwayNetwork, RoomQueue
from .safety import ControllerParams
from .tasking import Task, TaskRequest, TravelTimeGraph
from .world import Costmap, OccupancyGrid, inflate, load_map

Position = tuple[float, float]


class ScenarioError(ValueError):
    """Malformed or inconsistent scenario input."""


@dataclass(frozen=True)
class WorldParams:
    """Engine-level tuning outside the per-robot controller."""

    d_neighbor: float = 3.0
    n_rays: int = 16
    max_range: float = 3.0
    cost_weight: float = 3.0
    inflation_radius: float = 1.0
    cost_scale: float = 3.0
    release_distance: float = 2.0
    queue_request_factor: float = 1.5

    def __post_init__(self) -> None:
        for name in ("d_neighbor", "max_range", "cost_weight", "cost_scale",
                     "release_distance", "queue_request_factor"):
            if getattr(self, name) <= 0:
                raise ScenarioError(f"world parameter {name} must be positive")
        if self.n_rays < 1:
            raise ScenarioError("n_rays must be >= 1")
        if self.inflation_radius < 0:
            raise ScenarioError("inflation_radius must be >= 0")


@dataclass(frozen=True)
class RobotSpec:
    robot_id: int
    name: str
    start: Position
    heading: float = 0.0
    params: ControllerParams = field(default_factory=ControllerParams)


@dataclass(frozen=True)
class HumanSpec:
    start: Position
    waypoints: tuple[Position, ...] = ()
    v_desired: float = 1.0


@dataclass(frozen=True)
class RoomSpec:
    location: int
    polygon: tuple[Position, ...]
    queue_slots: tuple[Position, ...]


@dataclass
class Scenario:
    grid: OccupancyGrid
    costmap: Costmap
    map_text: str
    robots: list[RobotSpec]
    humans: list[HumanSpec]
    locations: dict[int, Position]
    roadways: RoadwayNetwork
    rooms: dict[int, RoomSpec]
    travel_graph: TravelTimeGraph | None
    task_stream: list[TaskRequest]
    world: WorldParams
    tick_dt: float = 0.01
    control_period: float = 0.05
    replan_period: float = 1.0
    duration: float = 60.0
    seed: int = 0
    digest: str = ""

    def build_queues(self) -> dict[int, RoomQueue]:
        return {
            loc: RoomQueue(
                room_id=loc,
                slots=list(spec.queue_slots),
                room_position=self.locations[loc],
            )
            for loc, spec in self.rooms.items()
        }


def _require(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ScenarioError(f"{context}: missing required key {key!r}")
    return mapping[key]


def _position(value, context: str) -> Position:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value)
    ):
        raise ScenarioError(f"{context}: expected [x, y], got {value!r}")
    return (float(value[0]), float(value[1]))


def _params_from(mapping: dict | None, base: ControllerParams, context: str) -> ControllerParams:
    if not mapping:
        return base
    fields = set(ControllerParams.__dataclass_fields__)
    unknown = set(mapping) - fields
    if unknown:
        raise ScenarioError(f"{context}: unknown controller parameters {sorted(unknown)}")
    values = {name: getattr(base, name) for name in fields}
    values.update({k: float(v) for k, v in mapping.items()})
    try:
        return ControllerParams(**values)
    except ValueError as exc:
        raise ScenarioError(f"{context}: {exc}") from None


def load_task_stream(text: str) -> list[TaskRequest]:
    """Parse the task-stream file: a JSON list of request batches."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"task stream: invalid JSON: {exc}") from None
    if not isinstance(raw, list):
        raise ScenarioError("task stream: top level must be a list of requests")
    requests = []
    for k, entry in enumerate(raw):
        ctx = f"task request {k}"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{ctx}: expected an object")
        arrival = _require(entry, "arrival", ctx)
        tasks_raw = _require(entry, "tasks", ctx)
        if not isinstance(tasks_raw, list):
            raise ScenarioError(f"{ctx}: 'tasks' must be a list")
        tasks = []
        for j, t in enumerate(tasks_raw):
            tctx = f"{ctx}, task {j}"
            if not isinstance(t, dict):
                raise ScenarioError(f"{tctx}: expected an object")
            try:
                tasks.append(Task(
                    start=int(_require(t, "start", tctx)),
                    end=int(_require(t, "end", tctx)),
                    deadline=float(_require(t, "deadline", tctx)),
                ))
            except ValueError as exc:
                raise ScenarioError(f"{tctx}: {exc}") from None
        try:
            requests.append(TaskRequest(float(arrival), tuple(tasks)))
        except ValueError as exc:
            raise ScenarioError(f"{ctx}: {exc}") from None
    order = [r.arrival for r in requests]
    if order != sorted(order):
        raise ScenarioError("task stream: request arrivals must be non-decreasing")
    return requests


def load_scenario(
    path: str | FsPath,
    tasks_path: str | FsPath | None = None,
    seed: int | None = None,
    duration: float | None = None,
) -> Scenario:
    """Load and validate a scenario plus its referenced files.

    ``tasks_path``, ``seed`` and ``duration`` override the scenario's own
    entries (command-line precedence). I/O failures propagate as OSError;
    everything about content raises ScenarioError.
    """
    path = FsPath(path)
    text = path.read_text()
    base = path.parent
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: invalid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")

    map_rel = _require(doc, "map", str(path))
    map_text = (base / map_rel).read_text()
    try:
        grid = load_map(map_text)
    except ValueError as exc:
        raise ScenarioError(f"map {map_rel}: {exc}") from None

    world_raw = doc.get("params", {}) or {}
    if not isinstance(world_raw, dict):
        raise ScenarioError("params: must be a mapping")
    try:
        world = WorldParams(**{
            k: v for k, v in (world_raw.get("world") or {}).items()
        })
    except TypeError as exc:
        raise ScenarioError(f"params.world: {exc}") from None
    base_controller = _params_from(
        world_raw.get("controller"), ControllerParams(), "params.controller"
    )

    agents_raw = _require(doc, "agents", str(path))
    if not isinstance(agents_raw, dict) or not agents_raw:
        raise ScenarioError("agents: expected a non-empty mapping of robot entries")
    costmap = inflate(
        grid, world.inflation_radius, world.cost_scale, base_controller.r_robot
    )
    robots = []
    for idx, (name, spec) in enumerate(agents_raw.items()):
        ctx = f"agents.{name}"
        if not isinstance(spec, dict):
            raise ScenarioError(f"{ctx}: expected a mapping")
        start = _position(_require(spec, "start", ctx), f"{ctx}.start")
        if not grid.in_bounds(*start):
            raise ScenarioError(f"{ctx}: start {start} is outside the map")
        cell = grid.world_to_cell(*start)
        if grid.is_occupied_cell(*cell):
            raise ScenarioError(f"{ctx}: start {start} lies on an occupied cell")
        params = _params_from(spec.get("params"), base_controller, f"{ctx}.params")
        robots.append(RobotSpec(
            robot_id=idx,
            name=str(name),
            start=start,
            heading=float(spec.get("heading", 0.0)),
            params=params,
        ))

    humans = []
    for k, entry in enumerate(doc.get("humans", []) or []):
        ctx = f"humans[{k}]"
        start = _position(_require(entry, "start", ctx), f"{ctx}.start")
        wps = tuple(
            _position(w, f"{ctx}.waypoints[{i}]")
            for i, w in enumerate(entry.get("waypoints", []) or [])
        )
        humans.append(HumanSpec(start, wps, float(entry.get("v_desired", 1.0))))

    locations: dict[int, Position] = {}
    for k, entry in enumerate(doc.get("locations", []) or []):
        locations[k] = _position(entry, f"locations[{k}]")

    routes: dict[tuple[int, int], list[Position]] = {}
    for k, entry in enumerate(doc.get("roadways", []) or []):
        ctx = f"roadways[{k}]"
        if not isinstance(entry, dict):
            raise ScenarioError(f"{ctx}: expected a mapping")
        a = int(_require(entry, "from", ctx))
        b = int(_require(entry, "to", ctx))
        wps = [
            _position(w, f"{ctx}.waypoints[{i}]")
            for i, w in enumerate(_require(entry, "waypoints", ctx))
        ]
        if a not in locations or b not in locations:
            raise ScenarioError(f"{ctx}: references unknown location {a if a not in locations else b}")
        routes[(a, b)] = wps
    net = RoadwayNetwork(dict(locations), routes)
    try:
        net.validate()
    except ValueError as exc:
        raise ScenarioError(f"roadways: {exc}") from None

    rooms: dict[int, RoomSpec] = {}
    for k, entry in enumerate(doc.get("rooms", []) or []):
        ctx = f"rooms[{k}]"
        loc = int(_require(entry, "location", ctx))
        if loc not in locations:
            raise ScenarioError(f"{ctx}: unknown location {loc}")
        polygon = tuple(
            _position(p, f"{ctx}.polygon[{i}]")
            for i, p in enumerate(_require(entry, "polygon", ctx))
        )
        if len(polygon) < 3:
            raise ScenarioError(f"{ctx}: polygon needs at least 3 vertices")
        slots = tuple(
            _position(s, f"{ctx}.queue_slots[{i}]")
            for i, s in enumerate(_require(entry, "queue_slots", ctx))
        )
        if not slots:
            raise ScenarioError(f"{ctx}: queue_slots must not be empty")
        rooms[loc] = RoomSpec(loc, polygon, slots)

    graph = None
    graph_rel = doc.get("travel_times")
    if graph_rel:
        graph_text = (base / graph_rel).read_text()
        try:
            graph = TravelTimeGraph.from_text(graph_text)
        except ValueError as exc:
            raise ScenarioError(f"travel_times {graph_rel}: {exc}") from None
        missing = set(locations) - set(graph.locations)
        if missing:
            raise ScenarioError(
                f"travel_times {graph_rel}: missing locations {sorted(missing)}"
            )

    tasks_text = ""
    if tasks_path is not None:
        tasks_text = FsPath(tasks_path).read_text()
    elif doc.get("tasks"):
        tasks_text = (base / doc["tasks"]).read_text()
    task_stream = load_task_stream(tasks_text) if tasks_text.strip() else []
    for k, req in enumerate(task_stream):
        for j, task in enumerate(req.tasks):
            for loc in (task.start, task.end):
                if loc not in locations:
                    raise ScenarioError(
                        f"task request {k}, task {j}: unknown location {loc}"
                    )
    if task_stream and graph is None:
        raise ScenarioError("scenario has tasks but no travel_times graph")

    tick_dt = float(doc.get("tick_dt", 0.01))
    control_period = float(doc.get("control_period", 0.05))
    replan_period = float(doc.get("replan_period", 1.0))
    if tick_dt <= 0 or control_period <= 0 or replan_period <= 0:
        raise ScenarioError("tick_dt, control_period and replan_period must be positive")
    ratio = control_period / tick_dt
    if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
        raise ScenarioError(
            f"control_period {control_period} must be an integer multiple of tick_dt {tick_dt}"
        )
    run_duration = float(duration if duration is not None else doc.get("duration", 60.0))
    if run_duration < 0:
        raise ScenarioError("duration must be >= 0")
    run_seed = int(seed if seed is not None else doc.get("seed", 0))

    digest = hashlib.sha256(
        (text + "\x00" + map_text + "\x00" + tasks_text).encode()
    ).hexdigest()

    return Scenario(
        grid=grid,
        costmap=costmap,
        map_text=map_text,
        robots=robots,
        humans=humans,
        locations=locations,
        roadways=net,
        rooms=rooms,
        travel_graph=graph,
        task_stream=task_stream,
        world=world,
        tick_dt=tick_dt,
        control_period=control_period,
        replan_period=replan_period,
        duration=run_duration,
        seed=run_seed,
        digest=digest,
    )
