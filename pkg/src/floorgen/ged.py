"""Exact graph edit distance between bubble diagrams.

Unit costs: node insertion, node deletion, node relabel, edge insertion and
edge deletion each cost 1. The search assigns the nodes of the first graph,
one at a time, either to an unused node of the second graph or to deletion,
and prunes with an admissible bound on the cost of the unassigned rest.
"""

from __future__ import annotations

from collections import Counter

from .errors import GEDBoundError
from .graph import BubbleDiagram

MAX_EXACT_NODES = 13


def _label_bound(types_a, types_b) -> int:
    common = sum((Counter(types_a) & Counter(types_b)).values())
    return max(len(types_a), len(types_b)) - common


def graph_edit_distance(a: BubbleDiagram, b: BubbleDiagram) -> int:
    n, m = len(a.nodes), len(b.nodes)
    if n > MAX_EXACT_NODES or m > MAX_EXACT_NODES:
        raise GEDBoundError(
            f"graph with {max(n, m)} nodes exceeds exact-GED bound of {MAX_EXACT_NODES} nodes"
        )
    adj_a = [[False] * n for _ in range(n)]
    for i, j in a.edges:
        adj_a[i][j] = adj_a[j][i] = True
    adj_b = [[False] * m for _ in range(m)]
    for i, j in b.edges:
        adj_b[i][j] = adj_b[j][i] = True

    # High-degree nodes first: their edge costs are decided early.
    order = sorted(range(n), key=lambda i: (-sum(adj_a[i]), i))
    position = {node: k for k, node in enumerate(order)}
    deg_b = [sum(row) for row in adj_b]

    # Edges of a whose later endpoint (in search order) is still unassigned at depth k.
    open_edges_a = [0] * (n + 1)
    for i, j in a.edges:
        last = max(position[i], position[j])
        for k in range(last + 1):
            open_edges_a[k] += 1

    best = n + m + len(a.edges) + len(b.edges)  # delete everything, insert everything
    mapping = [-1] * n  # search slot -> node of b, or -1 for deletion
    used = [False] * m

    def remaining_b_edges() -> int:
        # b edges with at least one endpoint not yet used as an image
        count = 0
        for u, v in b.edges:
            if not (used[u] and used[v]):
                count += 1
        return count

    def search(depth: int, cost: int) -> None:
        nonlocal best
        if cost >= best:
            return
        if depth == n:
            # insert unused b nodes and all b edges not realized between images
            extra = 0
            for v in range(m):
                if not used[v]:
                    extra += 1
            extra += remaining_b_edges()
            if cost + extra < best:
                best = cost + extra
            return
        rest_types_a = [a.nodes[order[k]] for k in range(depth, n)]
        rest_types_b = [b.nodes[v] for v in range(m) if not used[v]]
        bound = _label_bound(rest_types_a, rest_types_b) + abs(open_edges_a[depth] - remaining_b_edges())
        if cost + bound >= best:
            return

        node = order[depth]
        candidates = [v for v in range(m) if not used[v]]
        # Cheap-first ordering finds good incumbents early.
        candidates.sort(key=lambda v: (b.nodes[v] != a.nodes[node], abs(deg_b[v] - sum(adj_a[node]))))
        for v in candidates + [-1]:
            step = 0
            if v < 0:
                step += 1
                for k in range(depth):
                    if adj_a[node][order[k]]:
                        step += 1
            else:
                if b.nodes[v] != a.nodes[node]:
                    step += 1
                for k in range(depth):
                    prev = order[k]
                    w = mapping[k]
                    ea = adj_a[node][prev]
                    if w < 0:
                        if ea:
                            step += 1
                    elif ea != adj_b[v][w]:
                        step += 1
            mapping[depth] = v
            if v >= 0:
                used[v] = True
            search(depth + 1, cost + step)
            if v >= 0:
                used[v] = False
            mapping[depth] = -1

    search(0, 0)
    return best
