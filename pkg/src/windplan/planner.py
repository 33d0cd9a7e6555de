"""A* seeding over the cost map.

8-connected moves; an edge from a to b costs the step length times the
trapezoidal average (C[a] + C[b]) / 2. The heuristic is euclidean distance
times the global cost floor 0.1, which keeps it admissible and consistent on
any clamped map. Ties on f are broken toward larger g so deeper nodes expand
first, keeping expansions deterministic.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from heapq import heappop, heappush
from pathlib import Path

import numpy as np

from .costmap import CostMap
from .errors import NoPath, StartOrGoalBlocked

# Fixed neighbor order: axis moves first, then diagonals.
MOVES = ((1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1))
_SQRT2 = math.sqrt(2.0)

# Against-flow edge costs are scaled by 1 + this gain times the normalized
# wind speed at the target cell.
AGAINST_FLOW_GAIN = 2.5

# A mean start-to-goal alignment below this selects the against-flow variant.
AGAINST_FLOW_THRESHOLD = -0.3

COST_FLOOR = 0.1  # global lower clamp bound; basis of the heuristic


@dataclass
class GridPath:
    cells: list[tuple[int, int]]
    total_cost: float
    length_m: float
    against_flow: bool = False

    def points(self, cell_size: float) -> np.ndarray:
        """Cell-center polyline in meters, shape (n, 2)."""
        return np.array(
            [((i + 0.5) * cell_size, (j + 0.5) * cell_size) for i, j in self.cells]
        )


def select_variant(mean_alignment: float) -> bool:
    """True when the route is dominated by headwind and the against-flow
    edge weighting should be used."""
    return mean_alignment < AGAINST_FLOW_THRESHOLD


def astar(
    cm: CostMap,
    start_cell: tuple[int, int],
    goal_cell: tuple[int, int],
    against_flow: bool = False,
) -> GridPath:
    width, height = cm.width, cm.height
    cost = cm.cost
    obstacle = cm.obstacle
    speed_norm = cm.speed_norm
    cs = cm.cell_size

    for label, (i, j) in (("start", start_cell), ("goal", goal_cell)):
        if not (0 <= i < width and 0 <= j < height):
            raise StartOrGoalBlocked(f"{label} cell ({i}, {j}) is outside the grid")
        if obstacle[j, i]:
            raise StartOrGoalBlocked(f"{label} cell ({i}, {j}) is blocked")

    start_cell = (int(start_cell[0]), int(start_cell[1]))
    goal_cell = (int(goal_cell[0]), int(goal_cell[1]))
    gi, gj = goal_cell

    def heuristic(i: int, j: int) -> float:
        return COST_FLOOR * cs * math.hypot(i - gi, j - gj)

    g_score: dict[tuple[int, int], float] = {start_cell: 0.0}
    came_from: dict[tuple[int, int], tuple[int, int]] = {}
    closed: set[tuple[int, int]] = set()
    seq = 0  # insertion counter so heap ordering is total and deterministic
    open_heap: list[tuple[float, float, int, tuple[int, int]]] = [
        (heuristic(*start_cell), 0.0, seq, start_cell)
    ]

    while open_heap:
        _, neg_g, _, cell = heappop(open_heap)
        if cell in closed:
            continue
        if cell == goal_cell:
            return _reconstruct(came_from, cell, -neg_g, cs, against_flow)
        closed.add(cell)
        ci, cj = cell
        c_here = cost[cj, ci]
        for di, dj in MOVES:
            ni, nj = ci + di, cj + dj
            if not (0 <= ni < width and 0 <= nj < height):
                continue
            if obstacle[nj, ni]:
                continue
            nxt = (ni, nj)
            if nxt in closed:
                continue
            step_len = (_SQRT2 if di and dj else 1.0) * cs
            edge = step_len * (c_here + cost[nj, ni]) / 2.0
            if against_flow:
                edge *= 1.0 + AGAINST_FLOW_GAIN * speed_norm[nj, ni]
            cand = g_score[cell] + edge
            if cand < g_score.get(nxt, math.inf):
                g_score[nxt] = cand
                came_from[nxt] = cell
                seq += 1
                heappush(open_heap, (cand + heuristic(ni, nj), -cand, seq, nxt))

    raise NoPath(f"no route from {start_cell} to {goal_cell}")


def _reconstruct(
    came_from: dict, cell: tuple[int, int], total_cost: float, cs: float, against_flow: bool
) -> GridPath:
    cells = [cell]
    while cell in came_from:
        cell = came_from[cell]
        cells.append(cell)
    cells.reverse()
    length = 0.0
    for (i0, j0), (i1, j1) in zip(cells[:-1], cells[1:]):
        length += (_SQRT2 if (i1 - i0) and (j1 - j0) else 1.0) * cs
    return GridPath(cells=cells, total_cost=total_cost, length_m=length, against_flow=against_flow)


_FMT = "%.17g"


def write_path_csv(path: GridPath, cm: CostMap, out: str | Path) -> None:
    cs = cm.cell_size
    lines = [
        f"# gridpath cells={len(path.cells)} total_cost={_FMT % path.total_cost} length_m={_FMT % path.length_m}",
        "i,j,x,y,cumulative_cost",
    ]
    running = 0.0
    prev = None
    for i, j in path.cells:
        if prev is not None:
            pi, pj = prev
            step = (_SQRT2 if (i - pi) and (j - pj) else 1.0) * cs
            edge = step * (cm.cost[pj, pi] + cm.cost[j, i]) / 2.0
            if path.against_flow:
                edge *= 1.0 + AGAINST_FLOW_GAIN * cm.speed_norm[j, i]
            running += edge
        prev = (i, j)
        lines.append(
            f"{i},{j},{_FMT % ((i + 0.5) * cs)},{_FMT % ((j + 0.5) * cs)},{_FMT % running}"
        )
    Path(out).write_text("\n".join(lines) + "\n")
