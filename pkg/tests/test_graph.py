import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from floorgen.errors import GEDBoundError, InputError
from floorgen.ged import graph_edit_distance
from floorgen.graph import (
    BubbleDiagram,
    Rect,
    RoomType,
    extract_bubble_diagram,
    layout_from_json,
    layout_to_json,
    multi_hot,
    one_hot,
    rooms_adjacent,
    shortest_distance_matrix,
)


def random_diagram(rng, max_nodes, min_nodes=1, p=0.4, types=10):
    n = int(rng.integers(min_nodes, max_nodes + 1))
    edges = [(i, j) for i in range(n) for j in range(i + 1, n) if rng.random() < p]
    return BubbleDiagram([int(t) for t in rng.integers(0, types, size=n)], edges)


def floyd_warshall(g):
    n = len(g.nodes)
    inf = float("inf")
    d = np.full((n, n), inf)
    np.fill_diagonal(d, 0)
    for i, j in g.edges:
        d[i, j] = d[j, i] = 1
    for k in range(n):
        for i in range(n):
            for j in range(n):
                if d[i, k] + d[k, j] < d[i, j]:
                    d[i, j] = d[i, k] + d[k, j]
    return np.where(np.isinf(d), -1, d).astype(np.int64)


def brute_force_ged(a, b):
    """Minimum over every partial injection of a's nodes into b's nodes."""
    n, m = len(a.nodes), len(b.nodes)
    adj_a, adj_b = a.adjacency(), b.adjacency()
    best = None
    for images in itertools.product(range(-1, m), repeat=n):
        used = [v for v in images if v >= 0]
        if len(used) != len(set(used)):
            continue
        cost = 0
        for i, v in enumerate(images):
            cost += 1 if v < 0 else int(a.nodes[i] != b.nodes[v])
        cost += m - len(used)
        for i in range(n):
            for j in range(i + 1, n):
                vi, vj = images[i], images[j]
                mapped = vi >= 0 and vj >= 0
                if adj_a[i, j] and not (mapped and adj_b[vi, vj]):
                    cost += 1
        inverse = {v: i for i, v in enumerate(images) if v >= 0}
        for u, w in b.edges:
            if not (u in inverse and w in inverse and adj_a[inverse[u], inverse[w]]):
                cost += 1
        best = cost if best is None else min(best, cost)
    return best


# A small house: the closet opens off the living room, the bedroom off the
# dining room, and the kitchen hangs off the bedroom.
FIGURE_DIAGRAM = BubbleDiagram(
    [RoomType.LIVING_ROOM, RoomType.DINING_ROOM, RoomType.KITCHEN, RoomType.BEDROOM, RoomType.CLOSET],
    [(0, 1), (0, 4), (1, 3), (2, 3)],
)


class TestBubbleDiagram:
    def test_edges_are_normalized(self):
        g = BubbleDiagram(["bedroom", "kitchen"], [(1, 0), (0, 1)])
        assert g.edges == frozenset({(0, 1)})

    def test_self_loop_rejected(self):
        with pytest.raises(InputError):
            BubbleDiagram([0, 1], [(1, 1)])

    def test_out_of_range_rejected(self):
        with pytest.raises(InputError):
            BubbleDiagram([0, 1], [(0, 2)])

    def test_unknown_type_rejected(self):
        with pytest.raises(InputError):
            BubbleDiagram(["attic"])

    def test_json_round_trip(self):
        assert BubbleDiagram.from_json(FIGURE_DIAGRAM.to_json()) == FIGURE_DIAGRAM

    def test_permute(self):
        g = BubbleDiagram([0, 1, 2], [(0, 1)])
        p = g.permute([2, 0, 1])
        assert p.nodes == (RoomType(2), RoomType(0), RoomType(1))
        assert p.edges == frozenset({(1, 2)})

    def test_encodings(self):
        assert one_hot(RoomType.BATHROOM).tolist() == [0, 0, 0, 1, 0, 0, 0, 0, 0, 0]
        assert multi_hot(["bedroom", "bedroom", "kitchen"]).sum() == 2


class TestShortestDistances:
    def test_figure_distances(self):
        d = shortest_distance_matrix(FIGURE_DIAGRAM)
        living, dining, kitchen, bedroom, closet = range(5)
        assert d[dining, living] == 1
        assert d[dining, closet] == 2
        assert d[bedroom, closet] == 3
        assert d[kitchen, closet] == 4

    def test_path_graph(self):
        g = BubbleDiagram([0] * 4, [(0, 1), (1, 2), (2, 3)])
        expected = np.abs(np.subtract.outer(np.arange(4), np.arange(4)))
        np.testing.assert_array_equal(shortest_distance_matrix(g), expected)

    def test_disconnected_is_minus_one(self):
        d = shortest_distance_matrix(BubbleDiagram([0, 1, 2], [(0, 1)]))
        assert d[0, 2] == -1 and d[2, 1] == -1 and d[2, 2] == 0

    def test_matches_floyd_warshall(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            g = random_diagram(rng, 8)
            np.testing.assert_array_equal(shortest_distance_matrix(g), floyd_warshall(g))

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_symmetric_zero_diagonal_triangle(self, seed):
        d = shortest_distance_matrix(random_diagram(np.random.default_rng(seed), 7))
        assert np.array_equal(d, d.T)
        assert np.all(np.diag(d) == 0)
        n = len(d)
        for i, j, k in itertools.product(range(n), repeat=3):
            if min(d[i, k], d[k, j], d[i, j]) >= 0:
                assert d[i, j] <= d[i, k] + d[k, j]


class TestGraphEditDistance:
    def test_identical_is_zero(self):
        assert graph_edit_distance(FIGURE_DIAGRAM, FIGURE_DIAGRAM) == 0

    def test_single_edge_removed(self):
        fewer = BubbleDiagram(FIGURE_DIAGRAM.nodes, list(FIGURE_DIAGRAM.edges)[1:])
        assert graph_edit_distance(FIGURE_DIAGRAM, fewer) == 1

    def test_relabel_costs_one(self):
        a = BubbleDiagram(["bedroom", "kitchen"], [(0, 1)])
        b = BubbleDiagram(["bedroom", "bathroom"], [(0, 1)])
        assert graph_edit_distance(a, b) == 1

    def test_empty_graphs(self):
        assert graph_edit_distance(BubbleDiagram([]), BubbleDiagram([0, 1], [(0, 1)])) == 3

    def test_permutation_is_free(self):
        order = [4, 2, 0, 3, 1]
        assert graph_edit_distance(FIGURE_DIAGRAM, FIGURE_DIAGRAM.permute(order)) == 0

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(1)
        for _ in range(25):
            a, b = random_diagram(rng, 4, types=3), random_diagram(rng, 4, types=3)
            assert graph_edit_distance(a, b) == brute_force_ged(a, b)

    @settings(max_examples=30, deadline=None)
    @given(st.integers(0, 2**32 - 1))
    def test_metric_properties(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_diagram(rng, 5, types=3) for _ in range(3))
        ab = graph_edit_distance(a, b)
        assert ab == graph_edit_distance(b, a)
        assert ab >= 0
        assert ab <= graph_edit_distance(a, c) + graph_edit_distance(c, b)

    def test_size_bound(self):
        big = BubbleDiagram([0] * 14)
        with pytest.raises(GEDBoundError, match="14"):
            graph_edit_distance(big, BubbleDiagram([0]))

    def test_thirteen_nodes_is_tractable(self):
        rng = np.random.default_rng(3)
        a = random_diagram(rng, 13, min_nodes=13, p=0.25)
        b = random_diagram(rng, 13, min_nodes=13, p=0.25)
        assert 0 < graph_edit_distance(a, b) <= 13 + 13 + len(a.edges) + len(b.edges)


class TestAdjacency:
    def test_shared_edge_connects(self):
        assert rooms_adjacent(Rect(0, 0, 9, 9), Rect(10, 0, 19, 9))

    def test_far_apart_not_connected(self):
        assert not rooms_adjacent(Rect(0, 0, 5, 5), Rect(20, 20, 25, 25))

    def test_gap_threshold(self):
        base = Rect(0, 0, 9, 9)
        assert rooms_adjacent(base, Rect(12, 0, 19, 9))  # two empty columns
        assert not rooms_adjacent(base, Rect(13, 0, 19, 9))  # three

    def test_overlap_threshold(self):
        base = Rect(0, 0, 9, 9)
        assert rooms_adjacent(base, Rect(10, 6, 19, 15))  # rows 6..9 shared
        assert not rooms_adjacent(base, Rect(10, 7, 19, 15))  # only three rows

    def test_corner_touch_not_connected(self):
        assert not rooms_adjacent(Rect(0, 0, 9, 9), Rect(10, 10, 19, 19))

    def test_overlapping_rooms_connect(self):
        assert rooms_adjacent(Rect(0, 0, 9, 9), Rect(5, 5, 6, 6))

    def test_hand_built_layout(self):
        # living | kitchen on top, bedroom spans the bottom, a detached closet
        layout = [
            Rect(0, 0, 15, 15, "living room"),
            Rect(16, 0, 31, 15, "kitchen"),
            Rect(0, 16, 31, 25, "bedroom"),
            Rect(0, 29, 3, 31, "closet"),
        ]
        g = extract_bubble_diagram(layout)
        assert g.nodes == (RoomType.LIVING_ROOM, RoomType.KITCHEN, RoomType.BEDROOM, RoomType.CLOSET)
        assert g.edges == frozenset({(0, 1), (0, 2), (1, 2)})

    def test_extraction_is_order_independent(self):
        rng = np.random.default_rng(4)
        layout = []
        for _ in range(6):
            x0, x1 = sorted(rng.integers(0, 32, 2))
            y0, y1 = sorted(rng.integers(0, 32, 2))
            layout.append(Rect(x0, y0, x1, y1, int(rng.integers(10))))
        g = extract_bubble_diagram(layout)
        order = [3, 5, 0, 1, 4, 2]
        assert extract_bubble_diagram([layout[i] for i in order]) == g.permute(order)


class TestRect:
    def test_degenerate_rejected(self):
        with pytest.raises(InputError):
            Rect(5, 0, 4, 3)

    def test_canvas_bounds(self):
        with pytest.raises(InputError):
            Rect(0, 0, 32, 4).validate()

    def test_area_inclusive(self):
        assert Rect(0, 0, 0, 0).area == 1
        assert Rect(2, 3, 5, 3).area == 4

    def test_layout_json_round_trip(self):
        rooms = [Rect(0, 0, 3, 3, "bedroom"), Rect(4, 0, 9, 3, "balcony")]
        assert layout_from_json(layout_to_json(rooms)) == rooms
