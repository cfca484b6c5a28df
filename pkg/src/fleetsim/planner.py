"""Grid path planning over inflated costmaps.

8-connected A* with costmap-weighted edges. Paths are sequences of cell
centers in world coordinates; costs are reported in cell units so they can be
compared exactly against a uniform-cost search over the same graph.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from .world import Costmap, LETHAL_COST

SQRT2 = math.sqrt(2.0)

# (dx, dy, base length in cells)
_MOVES = (
    (1, 0, 1.0), (-1, 0, 1.0), (0, 1, 1.0), (0, -1, 1.0),
    (1, 1, SQRT2), (1, -1, SQRT2), (-1, 1, SQRT2), (-1, -1, SQRT2),
)


class PlanningError(ValueError):
    """Invalid planning query (out of bounds or lethal endpoint)."""


class UnreachableError(PlanningError):
    """No lethal-free path exists between the endpoints."""


@dataclass(frozen=True)
class Path:
    """Planned route: cell-center points in world coordinates."""

    points: tuple[tuple[float, float], ...]
    total_cost: float

    def __len__(self) -> int:
        return len(self.points)


def _edge_weight(cost_a: int, cost_b: int, length: float, cost_weight: float) -> float:
    avg = 0.5 * (cost_a + cost_b)
    return length * (1.0 + cost_weight * avg / 254.0)


def plan(
    costmap: Costmap,
    start: tuple[float, float],
    goal: tuple[float, float],
    cost_weight: float = 3.0,
) -> Path:
    """Plan a minimum-cost 8-connected path from start to goal.

    Edge weight is move length (1 or sqrt(2) cells) scaled by
    ``1 + cost_weight * avg(cell costs) / 254``. Lethal cells are never
    entered and diagonal moves may not cut corners past a lethal cell.
    Ties on f are broken toward larger g, then smaller cell index.
    """
    grid = costmap.grid
    try:
        s = grid.world_to_cell(*start)
        g = grid.world_to_cell(*goal)
    except ValueError as exc:
        raise PlanningError(str(exc)) from None
    cost = costmap.cost
    if cost[s[1], s[0]] == LETHAL_COST:
        raise PlanningError(f"start {start} lies on a lethal cell")
    if cost[g[1], g[0]] == LETHAL_COST:
        raise PlanningError(f"goal {goal} lies on a lethal cell")

    width, height = grid.width, grid.height

    def h(ix: int, iy: int) -> float:
        return math.hypot(ix - g[0], iy - g[1])

    start_idx = s[1] * width + s[0]
    open_heap: list[tuple[float, float, int]] = [(h(*s), 0.0, start_idx)]
    g_score: dict[int, float] = {start_idx: 0.0}
    came_from: dict[int, int] = {}
    closed: set[int] = set()

    while open_heap:
        f, neg_g, idx = heapq.heappop(open_heap)
        if idx in closed:
            continue
        closed.add(idx)
        iy, ix = divmod(idx, width)
        if (ix, iy) == g:
            return _reconstruct(costmap, came_from, idx, -neg_g)
        g_here = -neg_g
        c_here = int(cost[iy, ix])
        for dx, dy, length in _MOVES:
            nx, ny = ix + dx, iy + dy
            if not (0 <= nx < width and 0 <= ny < height):
                continue
            c_next = int(cost[ny, nx])
            if c_next == LETHAL_COST:
                continue
            if dx != 0 and dy != 0:
                # no squeezing diagonally past a lethal cell
                if cost[iy, nx] == LETHAL_COST or cost[ny, ix] == LETHAL_COST:
                    continue
            nidx = ny * width + nx
            if nidx in closed:
                continue
            tentative = g_here + _edge_weight(c_here, c_next, length, cost_weight)
            if tentative < g_score.get(nidx, math.inf):
                g_score[nidx] = tentative
                came_from[nidx] = idx
                heapq.heappush(open_heap, (tentative + h(nx, ny), -tentative, nidx))
    raise UnreachableError(f"no path from {start} to {goal}")


def _reconstruct(costmap: Costmap, came_from: dict[int, int], idx: int, total: float) -> Path:
    grid = costmap.grid
    width = grid.width
    cells = [idx]
    while idx in came_from:
        idx = came_from[idx]
        cells.append(idx)
    cells.reverse()
    points = tuple(grid.cell_center(i % width, i // width) for i in cells)
    return Path(points, total)


def lookahead_point(
    path: Path, position: tuple[float, float], delta: float
) -> tuple[float, float]:
    """Pick the tracking target on a path.

    Finds the path vertex nearest to ``position`` (lowest index on ties), then
    scans forward from it for the first vertex at least ``delta`` away from
    ``position``. Falls back to the final vertex when none qualifies.
    """
    if not path.points:
        raise ValueError("empty path")
    if delta < 0:
        raise ValueError("delta must be >= 0")
    px, py = position
    dists = [math.hypot(x - px, y - py) for x, y in path.points]
    nearest = min(range(len(dists)), key=lambda i: (dists[i], i))
    for i in range(nearest, len(dists)):
        if dists[i] >= delta:
            return path.points[i]
    return path.points[-1]
