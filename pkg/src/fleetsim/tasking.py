"""Task allocation: travel-time graph, exact and greedy solvers, dispatcher.

Tasks are pickup/drop-off pairs over named locations with hard deadlines.
The exact solver searches assignments and per-robot leg interleavings for the
minimum-makespan schedule meeting every deadline; the greedy solver is the
scalable earliest-deadline-first fallback. The dispatcher owns task lifecycle
state and re-solves whenever a new batch arrives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

EXACT_MAX_TASKS = 8
EXACT_MAX_ROBOTS = 6

PICKUP = "pickup"
DROPOFF = "dropoff"


@dataclass(frozen=True)
class Task:
    start: int
    end: int
    deadline: float

    def __post_init__(self) -> None:
        if self.start == self.end:
            raise ValueError("task start and end must differ")


@dataclass(frozen=True)
class TaskRequest:
    arrival: float
    tasks: tuple[Task, ...]

    def __post_init__(self) -> None:
        for t in self.tasks:
            if t.deadline <= self.arrival:
                raise ValueError(
                    f"task deadline {t.deadline} not after arrival {self.arrival}"
                )


@dataclass(frozen=True)
class TravelTimeGraph:
    """Symmetric positive travel times between system locations."""

    locations: tuple[int, ...]
    weights: np.ndarray  # seconds, shape (n, n)

    def __post_init__(self) -> None:
        n = len(self.locations)
        if self.weights.shape != (n, n):
            raise ValueError("weight matrix shape does not match locations")
        if len(set(self.locations)) != n:
            raise ValueError("duplicate location ids")
        if not np.allclose(self.weights, self.weights.T, atol=1e-9):
            raise ValueError("travel times must be symmetric")
        if np.any(np.diag(self.weights) != 0):
            raise ValueError("diagonal travel times must be zero")
        off = self.weights[~np.eye(n, dtype=bool)]
        if n > 1 and np.any(off <= 0):
            raise ValueError("off-diagonal travel times must be positive")

    def time(self, a: int, b: int) -> float:
        try:
            ia = self.locations.index(a)
            ib = self.locations.index(b)
        except ValueError:
            missing = a if a not in self.locations else b
            raise KeyError(f"unknown location {missing}") from None
        return float(self.weights[ia, ib])

    def to_text(self) -> str:
        header = " ".join(str(loc) for loc in self.locations)
        rows = [
            " ".join(f"{v:.9g}" for v in row) for row in self.weights
        ]
        return "\n".join([header] + rows) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "TravelTimeGraph":
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines:
            raise ValueError("empty travel-time graph file")
        try:
            locations = tuple(int(v) for v in lines[0].split())
        except ValueError as exc:
            raise ValueError(f"line 1: malformed location ids: {exc}") from None
        n = len(locations)
        if len(lines) != n + 1:
            raise ValueError(f"expected {n} matrix rows, found {len(lines) - 1}")
        rows = []
        for k, line in enumerate(lines[1:]):
            vals = line.split()
            if len(vals) != n:
                raise ValueError(f"line {k + 2}: expected {n} entries, found {len(vals)}")
            try:
                rows.append([float(v) for v in vals])
            except ValueError as exc:
                raise ValueError(f"line {k + 2}: malformed entry: {exc}") from None
        return cls(locations, np.array(rows))


@dataclass(frozen=True)
class Leg:
    """One scheduled stop: which task, which end of it, where, and when."""

    task: int  # index into the solver's task list
    stage: str  # PICKUP or DROPOFF
    location: int
    time: float


@dataclass(frozen=True)
class Allocation:
    sequences: dict[int, list[int]]  # robot -> visit order (location ids)
    predicted_times: dict[int, list[float]]
    legs: dict[int, list[Leg]] = field(default_factory=dict)
    unassigned: list[int] = field(default_factory=list)  # task indices

    def makespan(self, now: float) -> float:
        latest = now
        for times in self.predicted_times.values():
            if times:
                latest = max(latest, times[-1])
        return latest

    def validate(self) -> None:
        """Check single assignment and pickup-before-drop-off precedence."""
        owner: dict[int, int] = {}
        for rid, legs in self.legs.items():
            for leg in legs:
                if leg.task in owner and owner[leg.task] != rid:
                    raise ValueError(f"task {leg.task} split across robots")
                owner[leg.task] = rid
            pick = {leg.task: i for i, leg in enumerate(legs) if leg.stage == PICKUP}
            drop = {leg.task: i for i, leg in enumerate(legs) if leg.stage == DROPOFF}
            for t, i in pick.items():
                if t not in drop:
                    raise ValueError(f"task {t} picked up but never dropped off")
                if drop[t] < i:
                    raise ValueError(f"task {t} dropped off before pickup")
        for idx in self.unassigned:
            if idx in owner:
                raise ValueError(f"task {idx} both assigned and unassigned")


def _check_locations(robots: dict[int, int], tasks: list[Task], g: TravelTimeGraph) -> None:
    for rid, loc in robots.items():
        if loc not in g.locations:
            raise KeyError(f"robot {rid} at unknown location {loc}")
    for k, t in enumerate(tasks):
        if t.start not in g.locations or t.end not in g.locations:
            raise KeyError(f"task {k} references an unknown location")


def _best_schedule(
    start_loc: int,
    now: float,
    task_ids: tuple[int, ...],
    tasks: list[Task],
    g: TravelTimeGraph,
    pre_picked: frozenset[int],
    forced_first: tuple[int, str] | None,
) -> tuple[float, list[Leg]] | None:
    """Minimum-completion leg order for one robot over its assigned tasks.

    Depth-first search over pickup/drop-off interleavings with hard-deadline
    pruning and dominance pruning on (location, picked, done) states. Returns
    None when no order meets every deadline.
    """
    full = frozenset(task_ids)
    if forced_first is not None and forced_first[0] not in full:
        # the forced task is not assigned here (partial assignments during
        # search); its absence only shortens the schedule, keeping bounds valid
        forced_first = None
    best: list[tuple[float, list[Leg]] | None] = [None]
    visited: dict[tuple[int, frozenset, frozenset], float] = {}

    def legs_from(loc: int, picked: frozenset, done: frozenset) -> list[tuple[int, str, int]]:
        out = []
        for t in task_ids:
            if t in done:
                continue
            if t in picked:
                out.append((tasks[t].end, DROPOFF, t))
            elif t not in pre_picked:
                out.append((tasks[t].start, PICKUP, t))
            else:
                out.append((tasks[t].end, DROPOFF, t))
        out.sort()
        return out

    def dfs(loc: int, t_now: float, picked: frozenset, done: frozenset, seq: list[Leg]) -> None:
        if done == full:
            if best[0] is None or t_now < best[0][0]:
                best[0] = (t_now, list(seq))
            return
        if best[0] is not None and t_now >= best[0][0]:
            return
        key = (loc, picked, done)
        prev = visited.get(key)
        if prev is not None and prev <= t_now:
            return
        visited[key] = t_now
        for target, stage, t in legs_from(loc, picked, done):
            arrive = t_now + g.time(loc, target)
            if stage == DROPOFF and arrive > tasks[t].deadline:
                continue
            seq.append(Leg(t, stage, target, arrive))
            if stage == PICKUP:
                dfs(target, arrive, picked | {t}, done, seq)
            else:
                dfs(target, arrive, picked - {t}, done | {t}, seq)
            seq.pop()

    picked0 = frozenset(t for t in task_ids if t in pre_picked)
    if forced_first is not None:
        t, stage = forced_first
        target = tasks[t].start if stage == PICKUP else tasks[t].end
        arrive = now + g.time(start_loc, target)
        if stage == DROPOFF and arrive > tasks[t].deadline:
            return None
        leg = Leg(t, stage, target, arrive)
        if stage == PICKUP:
            dfs(target, arrive, picked0 | {t}, frozenset(), [leg])
        else:
            dfs(target, arrive, picked0 - {t}, frozenset({t}), [leg])
    else:
        dfs(start_loc, now, picked0, frozenset(), [])
    return best[0]


def solve_exact(
    robots: dict[int, int],
    tasks: list[Task],
    g: TravelTimeGraph,
    now: float,
    pinned: dict[int, int] | None = None,
    pre_picked: frozenset[int] = frozenset(),
    forced_first: dict[int, tuple[int, str]] | None = None,
) -> Allocation | None:
    """Minimum-makespan allocation meeting every deadline, or None.

    Branch-and-bound over task-to-robot assignments; each robot's legs are
    ordered by an exhaustive interleaving search. ``pinned`` forces specific
    tasks onto specific robots, ``pre_picked`` marks tasks already carried
    (only their drop-off remains), and ``forced_first`` pins a robot's
    in-progress leg as its first element. Ties break lexicographically by
    (robot id, visit sequence).
    """
    if len(tasks) > EXACT_MAX_TASKS or len(robots) > EXACT_MAX_ROBOTS:
        raise ValueError(
            f"instance too large for exact search "
            f"({len(tasks)} tasks, {len(robots)} robots); use solve_greedy"
        )
    _check_locations(robots, tasks, g)
    pinned = dict(pinned or {})
    forced_first = dict(forced_first or {})
    for rid, (t, stage) in forced_first.items():
        pinned.setdefault(t, rid)
    for t in pre_picked:
        if t not in pinned:
            raise ValueError(f"carried task {t} must be pinned to its robot")

    robot_ids = sorted(robots)
    if not robot_ids:
        raise ValueError("no robots")
    n_tasks = len(tasks)

    schedule_cache: dict[tuple[int, frozenset], tuple[float, list[Leg]] | None] = {}

    def robot_schedule(rid: int, assigned: frozenset[int]):
        key = (rid, assigned)
        if key not in schedule_cache:
            schedule_cache[key] = _best_schedule(
                robots[rid], now, tuple(sorted(assigned)), tasks, g,
                pre_picked, forced_first.get(rid),
            )
        return schedule_cache[key]

    best: list[tuple[float, tuple, dict[int, frozenset]] | None] = [None]

    def lex_key(assignment: dict[int, frozenset]) -> tuple:
        parts = []
        for rid in robot_ids:
            sched = robot_schedule(rid, assignment.get(rid, frozenset()))
            parts.append(tuple(leg.location for leg in sched[1]) if sched else ())
        return tuple(parts)

    def assign(task_idx: int, assignment: dict[int, frozenset], completions: dict[int, float]) -> None:
        if best[0] is not None and max(completions.values(), default=now) > best[0][0]:
            return
        if task_idx == n_tasks:
            makespan = max(completions.values(), default=now)
            key = lex_key(assignment)
            if best[0] is None or (makespan, key) < (best[0][0], best[0][1]):
                best[0] = (makespan, key, dict(assignment))
            return
        candidates = [pinned[task_idx]] if task_idx in pinned else robot_ids
        for rid in candidates:
            new_set = assignment.get(rid, frozenset()) | {task_idx}
            sched = robot_schedule(rid, new_set)
            if sched is None:
                continue
            assignment[rid] = new_set
            old = completions.get(rid)
            completions[rid] = sched[0]
            assign(task_idx + 1, assignment, completions)
            if old is None:
                del completions[rid]
            else:
                completions[rid] = old
            if len(new_set) == 1:
                del assignment[rid]
            else:
                assignment[rid] = new_set - {task_idx}

    assign(0, {}, {})
    if best[0] is None:
        return None
    assignment = best[0][2]
    sequences: dict[int, list[int]] = {rid: [] for rid in robot_ids}
    times: dict[int, list[float]] = {rid: [] for rid in robot_ids}
    legs: dict[int, list[Leg]] = {rid: [] for rid in robot_ids}
    for rid in robot_ids:
        sched = robot_schedule(rid, assignment.get(rid, frozenset()))
        if sched:
            legs[rid] = sched[1]
            sequences[rid] = [leg.location for leg in sched[1]]
            times[rid] = [leg.time for leg in sched[1]]
    return Allocation(sequences, times, legs, [])


def solve_greedy(
    robots: dict[int, int],
    tasks: list[Task],
    g: TravelTimeGraph,
    now: float,
    committed: dict[int, list[Leg]] | None = None,
) -> Allocation:
    """Earliest-deadline-first allocation.

    Existing committed legs are preserved in order; each remaining task is
    appended (pickup then drop-off) to whichever robot finishes it soonest.
    Tasks that meet their deadline on no robot are reported unassigned.
    """
    _check_locations(robots, tasks, g)
    committed = committed or {}
    robot_ids = sorted(robots)
    if not robot_ids:
        raise ValueError("no robots")
    legs: dict[int, list[Leg]] = {rid: list(committed.get(rid, [])) for rid in robot_ids}
    state: dict[int, tuple[int, float]] = {}
    for rid in robot_ids:
        if legs[rid]:
            state[rid] = (legs[rid][-1].location, legs[rid][-1].time)
        else:
            state[rid] = (robots[rid], now)
    scheduled = {leg.task for seq in committed.values() for leg in seq}
    unassigned: list[int] = []

    order = sorted(
        (k for k in range(len(tasks)) if k not in scheduled),
        key=lambda k: (tasks[k].deadline, k),
    )
    for k in order:
        task = tasks[k]
        best_rid, best_done = None, math.inf
        for rid in robot_ids:
            loc, t = state[rid]
            done = t + g.time(loc, task.start) + g.time(task.start, task.end)
            if done <= task.deadline and done < best_done:
                best_rid, best_done = rid, done
        if best_rid is None:
            unassigned.append(k)
            continue
        loc, t = state[best_rid]
        pick_t = t + g.time(loc, task.start)
        legs[best_rid].append(Leg(k, PICKUP, task.start, pick_t))
        legs[best_rid].append(Leg(k, DROPOFF, task.end, best_done))
        state[best_rid] = (task.end, best_done)

    sequences = {rid: [leg.location for leg in legs[rid]] for rid in robot_ids}
    times = {rid: [leg.time for leg in legs[rid]] for rid in robot_ids}
    return Allocation(sequences, times, legs, unassigned)


@dataclass
class TaskRecord:
    """Lifecycle of one accepted task."""

    task_id: str
    task: Task
    arrival: float
    robot: int | None = None
    picked_at: float | None = None
    dropped_at: float | None = None
    missed: bool = False
    unassigned: bool = False

    @property
    def completed(self) -> bool:
        return self.dropped_at is not None and not self.missed

    @property
    def terminal(self) -> bool:
        return self.completed or self.missed or self.unassigned


@dataclass(frozen=True)
class DispatchLeg:
    task_id: str
    stage: str
    location: int


@dataclass(frozen=True)
class DispatchResult:
    changed_robots: set[int]
    events: list[dict]
    allocation: Allocation | None


class Dispatcher:
    """Owns task lifecycle state and re-solves the allocation on new batches.

    Commitment rules on a re-solve: a carried task stays on its robot (only
    its drop-off remains), and each robot's in-progress first leg stays its
    first element. Tasks whose deadline has already passed stay in the
    schedule with their deadline lifted, so they still get finished. Exact
    search is used within its scale caps, greedy beyond them or when the
    exact problem has no deadline-respecting schedule.
    """

    def __init__(self, graph: TravelTimeGraph) -> None:
        self.graph = graph
        self.records: dict[str, TaskRecord] = {}
        self.robot_legs: dict[int, list[DispatchLeg]] = {}
        self.feedback: list[tuple[int, tuple[float, float], float]] = []
        self._counter = 0

    # -- engine-facing queries -------------------------------------------

    def current_leg(self, robot: int) -> DispatchLeg | None:
        legs = self.robot_legs.get(robot)
        return legs[0] if legs else None

    def has_tasks(self, robot: int) -> bool:
        return bool(self.robot_legs.get(robot))

    def counts(self) -> dict[str, int]:
        arrived = len(self.records)
        completed = sum(1 for r in self.records.values() if r.completed)
        missed = sum(1 for r in self.records.values() if r.missed)
        unassigned = sum(1 for r in self.records.values() if r.unassigned)
        return {
            "arrived": arrived,
            "completed": completed,
            "missed": missed,
            "unassigned": unassigned,
            "in_flight": arrived - completed - missed - unassigned,
        }

    def record_feedback(self, robot: int, waypoint: tuple[float, float], time: float) -> None:
        """Arrival-time feedback: logged for reporting, never folded into g."""
        self.feedback.append((robot, waypoint, time))

    # -- lifecycle transitions -------------------------------------------

    def complete_leg(self, robot: int, now: float) -> tuple[DispatchLeg, list[dict]]:
        """Pop the robot's front leg after it reached the leg's location."""
        leg = self.robot_legs[robot].pop(0)
        rec = self.records[leg.task_id]
        events: list[dict] = []
        if leg.stage == PICKUP:
            rec.picked_at = now
            events.append({"event": PICKUP, "task": leg.task_id, "robot": robot})
        else:
            rec.dropped_at = now
            events.append({"event": DROPOFF, "task": leg.task_id, "robot": robot})
            if not rec.missed:
                events.append({"event": "completed", "task": leg.task_id, "robot": robot})
        return leg, events

    def check_deadlines(self, now: float) -> list[dict]:
        events = []
        for rec in self.records.values():
            if not rec.terminal and rec.dropped_at is None and now > rec.task.deadline:
                rec.missed = True
                events.append({"event": "missed", "task": rec.task_id, "robot": rec.robot})
        return events

    # -- allocation -------------------------------------------------------

    def dispatch(
        self,
        incoming: TaskRequest | None,
        robots: dict[int, int],
        now: float,
    ) -> DispatchResult:
        events: list[dict] = []
        if incoming is not None:
            for task in incoming.tasks:
                tid = f"t{self._counter}"
                self._counter += 1
                self.records[tid] = TaskRecord(tid, task, incoming.arrival)
                events.append({
                    "event": "arrival", "task": tid, "robot": None,
                    "start": task.start, "end": task.end, "deadline": task.deadline,
                })
        if incoming is None or not incoming.tasks:
            return DispatchResult(set(), events, None)

        # build the solver's task list: everything not yet dropped or rejected
        open_ids = [
            tid for tid, rec in self.records.items()
            if rec.dropped_at is None and not rec.unassigned
        ]
        solver_tasks: list[Task] = []
        for tid in open_ids:
            rec = self.records[tid]
            deadline = math.inf if rec.missed else rec.task.deadline
            solver_tasks.append(replace(rec.task, deadline=deadline))
        index_of = {tid: k for k, tid in enumerate(open_ids)}

        pinned: dict[int, int] = {}
        pre_picked: set[int] = set()
        forced_first: dict[int, tuple[int, str]] = {}
        for tid in open_ids:
            rec = self.records[tid]
            if rec.picked_at is not None:
                pinned[index_of[tid]] = rec.robot
                pre_picked.add(index_of[tid])
        for rid, legs in self.robot_legs.items():
            if legs and legs[0].task_id in index_of:
                forced_first[rid] = (index_of[legs[0].task_id], legs[0].stage)

        allocation = None
        if len(solver_tasks) <= EXACT_MAX_TASKS and len(robots) <= EXACT_MAX_ROBOTS:
            allocation = solve_exact(
                robots, solver_tasks, self.graph, now,
                pinned=pinned, pre_picked=frozenset(pre_picked),
                forced_first=forced_first,
            )
        if allocation is None:
            committed: dict[int, list[Leg]] = {}
            for rid in sorted(robots):
                seq = []
                loc, t = robots[rid], now
                for dl in self.robot_legs.get(rid, []):
                    if dl.task_id not in index_of:
                        continue
                    t += self.graph.time(loc, dl.location)
                    loc = dl.location
                    seq.append(Leg(index_of[dl.task_id], dl.stage, dl.location, t))
                committed[rid] = seq
            allocation = solve_greedy(robots, solver_tasks, self.graph, now, committed)

        changed: set[int] = set()
        new_legs: dict[int, list[DispatchLeg]] = {}
        for rid in sorted(robots):
            legs = [
                DispatchLeg(open_ids[leg.task], leg.stage, leg.location)
                for leg in allocation.legs.get(rid, [])
            ]
            new_legs[rid] = legs
            if legs != self.robot_legs.get(rid, []):
                changed.add(rid)
        for rid, legs in new_legs.items():
            for leg in legs:
                rec = self.records[leg.task_id]
                if leg.stage == PICKUP and rec.robot != rid:
                    rec.robot = rid
                    events.append({"event": "assigned", "task": leg.task_id, "robot": rid})
        for k in allocation.unassigned:
            rec = self.records[open_ids[k]]
            if not rec.unassigned:
                rec.unassigned = True
                events.append({"event": "unassigned", "task": rec.task_id, "robot": None})
        self.robot_legs = new_legs
        return DispatchResult(changed, events, allocation)


def collect_travel_times(
    scenario,
    repetitions: int = 1,
    aggregate: str = "max",
) -> TravelTimeGraph:
    """Measure travel times by running a single robot between location pairs.

    Each ordered pair is simulated with the full plan/control/integrate stack;
    the pair weight aggregates the simulated durations over repetitions and
    both directions ("max" by default, "mean" as the alternative).
    """
    if aggregate not in ("max", "mean"):
        raise ValueError(f"unknown aggregate {aggregate!r}")
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    from .engine import measure_travel_time  # deferred: engine imports tasking

    loc_ids = tuple(sorted(scenario.locations))
    n = len(loc_ids)
    directed = np.zeros((n, n))
    for a in range(n):
        for b in range(n):
            if a == b:
                continue
            runs = [
                measure_travel_time(scenario, loc_ids[a], loc_ids[b])
                for _ in range(repetitions)
            ]
            directed[a, b] = max(runs) if aggregate == "max" else sum(runs) / len(runs)
    if aggregate == "max":
        weights = np.maximum(directed, directed.T)
    else:
        weights = 0.5 * (directed + directed.T)
    return TravelTimeGraph(loc_ids, weights)
