"""Grid search layer: optimality against an independent Dijkstra, heuristic
admissibility, the against-flow edge weighting, and path CSV output."""
import heapq
import math

import numpy as np
import pytest
from oracles import SQRT2, STEPS, dijkstra_cost

from windplan import planner
from windplan.costmap import CostMap
from windplan.errors import NoPath, StartOrGoalBlocked
from windplan.planner import GridPath, astar, select_variant, write_path_csv


def flat_map(n=16, value=0.5, cs=0.1):
    cost = np.full((n, n), value)
    obs = np.zeros((n, n), dtype=bool)
    return CostMap(n, n, cs, cost, obs, np.array([1.0, 0.0]))


def random_map(rng, n=32, density=0.25, cs=0.1):
    obs = rng.random((n, n)) < density
    cost = rng.uniform(0.1, 20.0, size=(n, n))
    free = np.argwhere(~obs)
    a = free[rng.integers(len(free))]
    b = free[rng.integers(len(free))]
    cm = CostMap(n, n, cs, cost, obs, np.array([1.0, 0.0]))
    return cm, (int(a[1]), int(a[0])), (int(b[1]), int(b[0]))


class TestAstarBasics:
    def test_diagonal_run_on_flat_map(self):
        cm = flat_map()
        path = astar(cm, (1, 1), (14, 14))
        assert path.cells == [(k, k) for k in range(1, 15)]
        assert path.total_cost == pytest.approx(0.5 * 13 * SQRT2 * 0.1, rel=1e-12)
        assert path.length_m == pytest.approx(13 * SQRT2 * 0.1, rel=1e-12)

    def test_wall_with_gap(self):
        cm = flat_map()
        cm.obstacle[:, 8] = True
        cm.obstacle[7, 8] = False
        path = astar(cm, (2, 7), (13, 7))
        assert (8, 7) in path.cells
        for i, j in path.cells:
            assert not cm.obstacle[j, i]

    def test_cells_are_eight_connected_and_free(self):
        rng = np.random.default_rng(5)
        cm, s, g = random_map(rng, n=24)
        if dijkstra_cost(cm, s, g) is None:
            pytest.skip("instance not solvable")
        path = astar(cm, s, g)
        assert path.cells[0] == s and path.cells[-1] == g
        for (i0, j0), (i1, j1) in zip(path.cells[:-1], path.cells[1:]):
            assert max(abs(i1 - i0), abs(j1 - j0)) == 1
            assert not cm.obstacle[j1, i1]

    def test_start_goal_validation(self):
        cm = flat_map()
        cm.obstacle[3, 3] = True
        with pytest.raises(StartOrGoalBlocked):
            astar(cm, (3, 3), (10, 10))
        with pytest.raises(StartOrGoalBlocked):
            astar(cm, (1, 1), (3, 3))
        with pytest.raises(StartOrGoalBlocked):
            astar(cm, (-1, 0), (10, 10))
        with pytest.raises(StartOrGoalBlocked):
            astar(cm, (1, 1), (16, 0))

    def test_no_path_when_walled_off(self):
        cm = flat_map()
        cm.obstacle[:, 8] = True
        with pytest.raises(NoPath):
            astar(cm, (2, 7), (13, 7))

    def test_trivial_start_equals_goal(self):
        cm = flat_map()
        path = astar(cm, (5, 5), (5, 5))
        assert path.cells == [(5, 5)]
        assert path.total_cost == 0.0
        assert path.length_m == 0.0


class TestOptimality:
    def test_matches_dijkstra_on_random_instances(self):
        rng = np.random.default_rng(42)
        solvable = 0
        for _ in range(50):
            cm, s, g = random_map(rng)
            oracle = dijkstra_cost(cm, s, g)
            try:
                got = astar(cm, s, g).total_cost
            except NoPath:
                got = None
            if oracle is None:
                assert got is None
            else:
                solvable += 1
                assert got == oracle
        assert solvable >= 25

    def test_base_mode_reduces_to_scaled_euclidean_metric(self):
        # on a uniform 0.5 map the optimal cost is exactly half the shortest
        # 8-connected length; the 0.5 scale commutes with IEEE rounding
        rng = np.random.default_rng(7)
        for _ in range(20):
            cm, s, g = random_map(rng)
            unit = CostMap(
                cm.width, cm.height, cm.cell_size,
                np.ones_like(cm.cost), cm.obstacle, np.array([1.0, 0.0]),
            )
            half = CostMap(
                cm.width, cm.height, cm.cell_size,
                np.full_like(cm.cost, 0.5), cm.obstacle, np.array([1.0, 0.0]),
            )
            length = dijkstra_cost(unit, s, g)
            try:
                got = astar(half, s, g).total_cost
            except NoPath:
                got = None
            if length is None:
                assert got is None
            else:
                assert got == 0.5 * length

    def test_heuristic_admissible_against_reverse_dijkstra(self):
        # h(n) must never exceed the true remaining cost from n to the goal
        rng = np.random.default_rng(11)
        for _ in range(5):
            cm, s, g = random_map(rng, n=16)
            w, h = cm.width, cm.height
            dist = {g: 0.0}
            heap = [(0.0, g)]
            while heap:
                d, (i, j) = heapq.heappop(heap)
                if d > dist.get((i, j), math.inf):
                    continue
                for di, dj, step in STEPS:
                    ni, nj = i + di, j + dj
                    if not (0 <= ni < w and 0 <= nj < h) or cm.obstacle[nj, ni]:
                        continue
                    cand = d + step * cm.cell_size * 0.5 * (cm.cost[j, i] + cm.cost[nj, ni])
                    if cand < dist.get((ni, nj), math.inf):
                        dist[(ni, nj)] = cand
                        heapq.heappush(heap, (cand, (ni, nj)))
            gi, gj = g
            for (i, j), true_cost in dist.items():
                h_val = planner.COST_FLOOR * cm.cell_size * math.hypot(i - gi, j - gj)
                assert h_val <= true_cost + 1e-12

    def test_cost_symmetric_under_endpoint_swap(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            cm, s, g = random_map(rng, n=24)
            if dijkstra_cost(cm, s, g) is None:
                continue
            fwd = astar(cm, s, g).total_cost
            rev = astar(cm, g, s).total_cost
            assert fwd == pytest.approx(rev, rel=1e-12)

    def test_uniform_scaling_of_costs(self):
        rng = np.random.default_rng(17)
        cm, s, g = random_map(rng, n=24, density=0.15)
        if dijkstra_cost(cm, s, g) is None:
            pytest.skip("instance not solvable")
        base = astar(cm, s, g).total_cost
        scaled_map = CostMap(
            cm.width, cm.height, cm.cell_size, cm.cost * 3.0, cm.obstacle,
            np.array([1.0, 0.0]),
        )
        scaled = astar(scaled_map, s, g).total_cost
        assert scaled == pytest.approx(3.0 * base, rel=1e-12)
        assert scaled == dijkstra_cost(scaled_map, s, g)


class TestAgainstFlow:
    def test_variant_selection_threshold(self):
        assert select_variant(-1.0) is True
        assert select_variant(-0.31) is True
        assert select_variant(-0.3) is False  # strict inequality at the threshold
        assert select_variant(-0.29) is False
        assert select_variant(0.0) is False
        assert select_variant(1.0) is False

    def test_edge_scaling_hand_sum_on_forced_corridor(self):
        # single-file corridor: the route is forced, so the total must equal
        # the hand-summed against-flow edge costs
        cost = np.full((3, 6), 2.0)
        obs = np.ones((3, 6), dtype=bool)
        obs[1, :] = False
        speed = np.zeros((3, 6))
        speed[1, :] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]
        cm = CostMap(6, 3, 0.1, cost, obs, np.array([1.0, 0.0]), speed_norm=speed)
        path = astar(cm, (0, 1), (5, 1), against_flow=True)
        expected = sum(
            0.1 * 2.0 * (1.0 + planner.AGAINST_FLOW_GAIN * speed[1, i])
            for i in range(1, 6)
        )
        assert path.total_cost == pytest.approx(expected, rel=1e-12)
        assert path.against_flow is True

    def test_matches_dijkstra_with_weighting(self):
        rng = np.random.default_rng(23)
        for _ in range(10):
            cm, s, g = random_map(rng, n=24)
            cm.speed_norm = rng.uniform(0.0, 1.0, size=cm.cost.shape)
            oracle = dijkstra_cost(cm, s, g, against_flow_gain=planner.AGAINST_FLOW_GAIN)
            try:
                got = astar(cm, s, g, against_flow=True).total_cost
            except NoPath:
                got = None
            assert got == oracle

    def test_weighting_avoids_fast_air(self):
        # two equal-length corridors; the windy one should lose under the
        # against-flow weighting and win without it (tie broken by cost)
        cost = np.full((5, 10), 1.0)
        obs = np.zeros((5, 10), dtype=bool)
        obs[2, 1:9] = True  # split into top and bottom corridors
        speed = np.zeros((5, 10))
        speed[3:, :] = 0.9  # top corridor is fast air
        cost[3:, :] = 0.9   # but slightly cheaper map cost
        cm = CostMap(10, 5, 0.1, cost, obs, np.array([1.0, 0.0]), speed_norm=speed)
        plain = astar(cm, (0, 2), (9, 2), against_flow=False)
        weighted = astar(cm, (0, 2), (9, 2), against_flow=True)
        assert any(j >= 3 for _, j in plain.cells)
        assert all(j < 3 for i, j in weighted.cells if i not in (0, 9))


class TestPathOutput:
    def test_points_are_cell_centers(self):
        path = GridPath(cells=[(0, 0), (1, 1)], total_cost=1.0, length_m=SQRT2 * 0.2)
        pts = path.points(0.2)
        np.testing.assert_allclose(pts, [[0.1, 0.1], [0.3, 0.3]])

    def test_csv_cumulative_column_reaches_total(self, tmp_path):
        rng = np.random.default_rng(31)
        cm, s, g = random_map(rng, n=24)
        if dijkstra_cost(cm, s, g) is None:
            pytest.skip("instance not solvable")
        path = astar(cm, s, g)
        out = tmp_path / "path.csv"
        write_path_csv(path, cm, out)
        lines = out.read_text().strip().splitlines()
        assert lines[0].startswith("# gridpath")
        assert lines[1] == "i,j,x,y,cumulative_cost"
        assert len(lines) == 2 + len(path.cells)
        first = lines[2].split(",")
        assert float(first[4]) == 0.0
        last = lines[-1].split(",")
        assert (int(last[0]), int(last[1])) == g
        assert float(last[4]) == pytest.approx(path.total_cost, rel=1e-12)

    def test_csv_coordinates_match_cell_centers(self, tmp_path):
        cm = flat_map()
        path = astar(cm, (1, 1), (4, 2))
        out = tmp_path / "p.csv"
        write_path_csv(path, cm, out)
        rows = [ln.split(",") for ln in out.read_text().strip().splitlines()[2:]]
        for row, (i, j) in zip(rows, path.cells):
            assert float(row[2]) == pytest.approx((i + 0.5) * 0.1, rel=1e-15)
            assert float(row[3]) == pytest.approx((j + 0.5) * 0.1, rel=1e-15)
