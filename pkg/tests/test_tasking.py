import math

import numpy as np
import pytest

from fleetsim.tasking import (
    DROPOFF,
    EXACT_MAX_ROBOTS,
    EXACT_MAX_TASKS,
    PICKUP,
    Allocation,
    Dispatcher,
    Leg,
    Task,
    TaskRequest,
    TravelTimeGraph,
    collect_travel_times,
    solve_exact,
    solve_greedy,
)

from _support import enumerate_best_makespan, straight_line_graph

LINE = straight_line_graph({k: (float(k), 0.0) for k in range(5)})


class TestDataTypes:
    def test_task_endpoints_must_differ(self):
        with pytest.raises(ValueError, match="differ"):
            Task(1, 1, 10.0)

    def test_request_deadline_after_arrival(self):
        with pytest.raises(ValueError, match="arrival"):
            TaskRequest(5.0, (Task(0, 1, 5.0),))
        TaskRequest(5.0, (Task(0, 1, 5.1),))


class TestTravelTimeGraph:
    def test_time_lookup(self):
        assert LINE.time(0, 3) == 3.0
        assert LINE.time(3, 0) == 3.0
        assert LINE.time(2, 2) == 0.0

    def test_unknown_location(self):
        with pytest.raises(KeyError, match="9"):
            LINE.time(0, 9)

    def test_text_round_trip(self):
        text = LINE.to_text()
        again = TravelTimeGraph.from_text(text)
        assert again.locations == LINE.locations
        assert np.array_equal(again.weights, LINE.weights)

    @pytest.mark.parametrize("weights,fragment", [
        (np.array([[0.0, 1.0], [2.0, 0.0]]), "symmetric"),
        (np.array([[1.0, 2.0], [2.0, 0.0]]), "diagonal"),
        (np.array([[0.0, -1.0], [-1.0, 0.0]]), "positive"),
        (np.zeros((3, 3)), "shape"),
    ])
    def test_validation(self, weights, fragment):
        with pytest.raises(ValueError, match=fragment):
            TravelTimeGraph((0, 1), weights)

    def test_duplicate_ids(self):
        with pytest.raises(ValueError, match="duplicate"):
            TravelTimeGraph((1, 1), np.array([[0.0, 1.0], [1.0, 0.0]]))

    @pytest.mark.parametrize("text,fragment", [
        ("", "empty"),
        ("0 x\n0 1\n1 0\n", "location ids"),
        ("0 1\n0 1\n", "matrix rows"),
        ("0 1\n0 1\n1\n", "entries"),
        ("0 1\n0 one\none 0\n", "malformed"),
    ])
    def test_from_text_errors(self, text, fragment):
        with pytest.raises(ValueError, match=fragment):
            TravelTimeGraph.from_text(text)


class TestAllocationValidate:
    def test_split_task_rejected(self):
        alloc = Allocation({}, {}, legs={
            0: [Leg(0, PICKUP, 1, 1.0), Leg(0, DROPOFF, 2, 2.0)],
            1: [Leg(0, PICKUP, 1, 3.0), Leg(0, DROPOFF, 2, 4.0)],
        })
        with pytest.raises(ValueError, match="split"):
            alloc.validate()

    def test_pickup_without_dropoff_rejected(self):
        alloc = Allocation({}, {}, legs={0: [Leg(0, PICKUP, 1, 1.0)]})
        with pytest.raises(ValueError, match="never dropped"):
            alloc.validate()

    def test_dropoff_before_pickup_rejected(self):
        alloc = Allocation({}, {}, legs={
            0: [Leg(0, DROPOFF, 2, 1.0), Leg(0, PICKUP, 1, 2.0)],
        })
        with pytest.raises(ValueError, match="before pickup"):
            alloc.validate()

    def test_assigned_and_unassigned_rejected(self):
        alloc = Allocation({}, {}, legs={
            0: [Leg(0, PICKUP, 1, 1.0), Leg(0, DROPOFF, 2, 2.0)],
        }, unassigned=[0])
        with pytest.raises(ValueError, match="both"):
            alloc.validate()

    def test_makespan(self):
        alloc = Allocation({0: [1], 1: []}, {0: [4.5], 1: []})
        assert alloc.makespan(0.0) == 4.5
        assert alloc.makespan(9.0) == 9.0


class TestSolveExact:
    def test_single_robot_single_task(self):
        alloc = solve_exact({0: 0}, [Task(2, 4, 100.0)], LINE, 0.0)
        assert alloc.sequences[0] == [2, 4]
        assert alloc.predicted_times[0] == [2.0, 4.0]
        assert alloc.legs[0] == [Leg(0, PICKUP, 2, 2.0), Leg(0, DROPOFF, 4, 4.0)]
        assert alloc.makespan(0.0) == 4.0
        alloc.validate()

    def test_offset_start_time(self):
        alloc = solve_exact({0: 0}, [Task(2, 4, 100.0)], LINE, 10.0)
        assert alloc.predicted_times[0] == [12.0, 14.0]

    def test_interleaves_pickups(self):
        # carrying both items at once: p1 p2 d1 d2 in one straight sweep
        tasks = [Task(1, 3, 100.0), Task(2, 4, 100.0)]
        alloc = solve_exact({0: 0}, tasks, LINE, 0.0)
        assert alloc.sequences[0] == [1, 2, 3, 4]
        assert alloc.makespan(0.0) == 4.0

    def test_splits_tasks_across_robots(self):
        g = straight_line_graph({
            0: (0.0, 0.0), 1: (1.0, 0.0), 2: (2.0, 0.0),
            10: (10.0, 0.0), 11: (11.0, 0.0), 12: (12.0, 0.0),
        })
        tasks = [Task(1, 2, 100.0), Task(11, 12, 100.0)]
        alloc = solve_exact({0: 0, 1: 10}, tasks, g, 0.0)
        assert alloc.sequences[0] == [1, 2]
        assert alloc.sequences[1] == [11, 12]

    def test_deadline_infeasible_returns_none(self):
        assert solve_exact({0: 0}, [Task(2, 4, 3.0)], LINE, 0.0) is None

    def test_deadline_forces_split(self):
        # a lone robot finishes task 1 at t=4.0 at best, after its deadline;
        # a second robot sitting on the pickup meets it easily
        g = straight_line_graph({
            0: (0.0, 0.0), 1: (1.0, 0.0), 2: (2.0, 0.0),
            3: (3.0, 0.0), 4: (4.0, 0.0),
        })
        tasks = [Task(1, 3, 100.0), Task(2, 4, 3.9)]
        assert solve_exact({0: 0}, tasks, g, 0.0) is None
        alloc = solve_exact({0: 0, 1: 2}, tasks, g, 0.0)
        assert alloc is not None
        assert alloc.sequences[1] == [2, 4]
        assert alloc.sequences[0] == [1, 3]

    def test_makespan_tie_is_deterministic(self):
        g = straight_line_graph({
            0: (0.0, 0.0), 10: (10.0, 0.0), 1: (5.0, 0.0), 2: (5.0, 2.0),
        })
        alloc = solve_exact({0: 0, 1: 10}, [Task(1, 2, 100.0)], g, 0.0)
        # both robots reach the task in the same time; the lex key on
        # per-robot visit sequences leaves the lower robot empty
        assert alloc.sequences[0] == []
        assert alloc.sequences[1] == [1, 2]

    def test_pinned_task(self):
        g = straight_line_graph({
            0: (0.0, 0.0), 10: (10.0, 0.0), 1: (1.0, 0.0), 2: (2.0, 0.0),
        })
        alloc = solve_exact({0: 0, 1: 10}, [Task(1, 2, 100.0)], g, 0.0,
                            pinned={0: 1})
        assert alloc.sequences[1] == [1, 2]
        assert alloc.sequences[0] == []

    def test_pre_picked_skips_pickup(self):
        alloc = solve_exact({0: 0}, [Task(2, 4, 100.0)], LINE, 0.0,
                            pinned={0: 0}, pre_picked=frozenset({0}))
        assert alloc.legs[0] == [Leg(0, DROPOFF, 4, 4.0)]

    def test_pre_picked_requires_pin(self):
        with pytest.raises(ValueError, match="pinned"):
            solve_exact({0: 0}, [Task(2, 4, 100.0)], LINE, 0.0,
                        pre_picked=frozenset({0}))

    def test_forced_first_overrides_better_order(self):
        tasks = [Task(1, 3, 100.0), Task(2, 4, 100.0)]
        free = solve_exact({0: 0}, tasks, LINE, 0.0)
        assert free.legs[0][0].task == 0
        forced = solve_exact({0: 0}, tasks, LINE, 0.0,
                             forced_first={0: (1, PICKUP)})
        assert forced.legs[0][0] == Leg(1, PICKUP, 2, 2.0)
        assert forced.makespan(0.0) >= free.makespan(0.0)

    def test_size_caps(self):
        tasks = [Task(0, 1, 100.0)] * (EXACT_MAX_TASKS + 1)
        with pytest.raises(ValueError, match="too large"):
            solve_exact({0: 0}, tasks, LINE, 0.0)
        robots = {k: 0 for k in range(EXACT_MAX_ROBOTS + 1)}
        with pytest.raises(ValueError, match="too large"):
            solve_exact(robots, [Task(0, 1, 100.0)], LINE, 0.0)

    def test_no_robots(self):
        with pytest.raises(ValueError, match="no robots"):
            solve_exact({}, [Task(0, 1, 100.0)], LINE, 0.0)

    def test_unknown_locations(self):
        with pytest.raises(KeyError):
            solve_exact({0: 99}, [Task(0, 1, 100.0)], LINE, 0.0)
        with pytest.raises(KeyError):
            solve_exact({0: 0}, [Task(0, 99, 100.0)], LINE, 0.0)

    def test_matches_enumeration_on_small_instances(self):
        import random

        rng = random.Random(3)
        for _ in range(20):
            n_loc = rng.randint(2, 5)
            locs = {k: (rng.uniform(0, 20), rng.uniform(0, 20)) for k in range(n_loc)}
            g = straight_line_graph(locs)
            robots = {r: rng.randrange(n_loc) for r in range(rng.randint(1, 2))}
            tasks = []
            for _ in range(rng.randint(1, 3)):
                a, b = rng.sample(range(n_loc), 2)
                tasks.append(Task(a, b, rng.uniform(10.0, 90.0)))
            expected = enumerate_best_makespan(robots, tasks, g, 0.0)
            alloc = solve_exact(robots, tasks, g, 0.0)
            if expected is None:
                assert alloc is None
            else:
                assert alloc is not None
                assert alloc.makespan(0.0) == expected
                alloc.validate()


class TestSolveGreedy:
    def test_earliest_deadline_first(self):
        # task 1 has the tighter deadline and grabs the better robot
        tasks = [Task(3, 4, 100.0), Task(1, 2, 8.0)]
        alloc = solve_greedy({0: 0}, tasks, LINE, 0.0)
        assert [leg.task for leg in alloc.legs[0]] == [1, 1, 0, 0]
        alloc.validate()

    def test_soonest_finisher_wins(self):
        alloc = solve_greedy({0: 0, 1: 3}, [Task(3, 4, 100.0)], LINE, 0.0)
        assert alloc.sequences[1] == [3, 4]
        assert alloc.sequences[0] == []

    def test_unassigned_when_no_deadline_fits(self):
        tasks = [Task(2, 4, 3.0), Task(1, 2, 100.0)]
        alloc = solve_greedy({0: 0}, tasks, LINE, 0.0)
        assert alloc.unassigned == [0]
        assert [leg.task for leg in alloc.legs[0]] == [1, 1]

    def test_committed_legs_preserved(self):
        committed = {0: [Leg(0, PICKUP, 1, 1.0), Leg(0, DROPOFF, 2, 2.0)]}
        tasks = [Task(1, 2, 100.0), Task(3, 4, 100.0)]
        alloc = solve_greedy({0: 0}, tasks, LINE, 0.0, committed=committed)
        assert alloc.legs[0][:2] == committed[0]
        assert [leg.task for leg in alloc.legs[0]] == [0, 0, 1, 1]
        # the appended task starts from the committed tail state
        assert alloc.legs[0][2].time == pytest.approx(2.0 + 1.0)

    def test_no_robots(self):
        with pytest.raises(ValueError, match="no robots"):
            solve_greedy({}, [Task(0, 1, 100.0)], LINE, 0.0)


class TestDispatcher:
    def make(self):
        return Dispatcher(LINE)

    def test_arrival_and_assignment_events(self):
        d = self.make()
        res = d.dispatch(TaskRequest(0.0, (Task(2, 4, 100.0),)), {0: 0}, 0.0)
        kinds = [e["event"] for e in res.events]
        assert kinds == ["arrival", "assigned"]
        assert res.events[0]["task"] == "t0"
        assert d.current_leg(0).stage == PICKUP
        assert d.has_tasks(0)
        assert res.changed_robots == {0}
        assert d.counts()["in_flight"] == 1

    def test_complete_leg_lifecycle(self):
        d = self.make()
        d.dispatch(TaskRequest(0.0, (Task(2, 4, 100.0),)), {0: 0}, 0.0)
        leg, events = d.complete_leg(0, 2.0)
        assert leg.stage == PICKUP
        assert [e["event"] for e in events] == ["pickup"]
        leg, events = d.complete_leg(0, 4.0)
        assert leg.stage == DROPOFF
        assert [e["event"] for e in events] == ["dropoff", "completed"]
        assert d.counts()["completed"] == 1
        assert not d.has_tasks(0)

    def test_missed_deadline_reported_once(self):
        d = self.make()
        d.dispatch(TaskRequest(0.0, (Task(2, 4, 5.0),)), {0: 0}, 0.0)
        assert d.check_deadlines(4.0) == []
        events = d.check_deadlines(6.0)
        assert [e["event"] for e in events] == ["missed"]
        assert d.check_deadlines(7.0) == []
        assert d.counts()["missed"] == 1

    def test_missed_task_kept_in_schedule(self):
        d = self.make()
        d.dispatch(TaskRequest(0.0, (Task(2, 4, 5.0),)), {0: 0}, 0.0)
        d.check_deadlines(6.0)
        # a new batch re-solves; the missed task stays scheduled with its
        # deadline lifted rather than being dropped
        res = d.dispatch(TaskRequest(6.0, (Task(1, 2, 100.0),)), {0: 0}, 6.0)
        scheduled = {leg.task_id for leg in d.robot_legs[0]}
        assert scheduled == {"t0", "t1"}
        assert res.allocation is not None

    def test_picked_task_stays_on_robot(self):
        d = self.make()
        d.dispatch(TaskRequest(0.0, (Task(2, 4, 100.0),)), {0: 0, 1: 4}, 0.0)
        robot = d.records["t0"].robot
        d.complete_leg(robot, 2.0)  # picked up
        d.dispatch(TaskRequest(2.0, (Task(1, 2, 100.0),)), {0: 2, 1: 4}, 2.0)
        assert d.records["t0"].robot == robot
        legs = d.robot_legs[robot]
        assert legs[0] == type(legs[0])("t0", DROPOFF, 4)

    def test_dispatch_without_incoming(self):
        d = self.make()
        res = d.dispatch(None, {0: 0}, 1.0)
        assert res.events == [] and res.changed_robots == set()
        assert res.allocation is None

    def test_unassigned_event(self):
        d = self.make()
        tasks = tuple(Task(1, 2, 4.05) for _ in range(9))  # over the exact cap
        res = d.dispatch(TaskRequest(0.0, tasks), {0: 4}, 0.0)
        kinds = [e["event"] for e in res.events]
        # greedy fallback: one task fits the deadline, the rest are rejected
        assert kinds.count("unassigned") == 8
        assert d.counts()["unassigned"] == 8

    def test_record_feedback(self):
        d = self.make()
        d.record_feedback(0, (1.0, 2.0), 3.0)
        assert d.feedback == [(0, (1.0, 2.0), 3.0)]


class TestCollectTravelTimes:
    def test_rejects_bad_arguments(self):
        with pytest.raises(ValueError, match="aggregate"):
            collect_travel_times(None, aggregate="median")
        with pytest.raises(ValueError, match="repetitions"):
            collect_travel_times(None, repetitions=0)
