"""Bubble diagrams, room rectangles and the graph quantities derived from them."""

from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InputError

CANVAS = 32
# Adjacency thresholds on the 32x32 canvas, in pixels.
ADJ_GAP = 2
ADJ_OVERLAP = 4


class RoomType(enum.IntEnum):
    LIVING_ROOM = 0
    KITCHEN = 1
    BEDROOM = 2
    BATHROOM = 3
    CLOSET = 4
    BALCONY = 5
    CORRIDOR = 6
    DINING_ROOM = 7
    LAUNDRY_ROOM = 8
    UNKNOWN = 9

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", " ")

    @classmethod
    def parse(cls, value) -> "RoomType":
        if isinstance(value, RoomType):
            return value
        if isinstance(value, (int, np.integer)):
            return cls(int(value))
        key = str(value).strip().upper().replace(" ", "_").replace("-", "_")
        try:
            return cls[key]
        except KeyError:
            raise InputError(f"unknown room type {value!r}") from None


NUM_ROOM_TYPES = len(RoomType)


def one_hot(t) -> np.ndarray:
    v = np.zeros(NUM_ROOM_TYPES)
    v[int(RoomType.parse(t))] = 1.0
    return v


def multi_hot(types: Iterable) -> np.ndarray:
    """Indicator of which room types occur at least once."""
    v = np.zeros(NUM_ROOM_TYPES)
    for t in types:
        v[int(RoomType.parse(t))] = 1.0
    return v


@dataclass(frozen=True)
class BubbleDiagram:
    """Undirected room graph. Edges are stored as sorted ``(i, j)`` pairs with ``i < j``."""

    nodes: tuple[RoomType, ...]
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __init__(self, nodes: Sequence, edges: Iterable[Sequence[int]] = ()):
        nodes = tuple(RoomType.parse(t) for t in nodes)
        normalized = set()
        for e in edges:
            i, j = (int(v) for v in e)
            if i == j:
                raise InputError(f"self-loop on node {i}")
            if not (0 <= i < len(nodes) and 0 <= j < len(nodes)):
                raise InputError(f"edge ({i}, {j}) out of range for {len(nodes)} nodes")
            normalized.add((min(i, j), max(i, j)))
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(normalized))

    def __len__(self) -> int:
        return len(self.nodes)

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def adjacency(self) -> np.ndarray:
        n = len(self.nodes)
        a = np.zeros((n, n))
        for i, j in self.edges:
            a[i, j] = a[j, i] = 1.0
        return a

    def neighbors(self, i: int) -> list[int]:
        return sorted({b if a == i else a for a, b in self.edges if i in (a, b)})

    def sorted_edges(self) -> list[tuple[int, int]]:
        return sorted(self.edges)

    def permute(self, order: Sequence[int]) -> "BubbleDiagram":
        """Diagram whose node ``k`` is this diagram's node ``order[k]``."""
        inverse = {old: new for new, old in enumerate(order)}
        return BubbleDiagram([self.nodes[o] for o in order], [(inverse[i], inverse[j]) for i, j in self.edges])

    def to_json(self) -> dict:
        return {"nodes": [t.label for t in self.nodes], "edges": [list(e) for e in self.sorted_edges()]}

    @classmethod
    def from_json(cls, doc: dict) -> "BubbleDiagram":
        return cls(doc["nodes"], doc.get("edges", []))


@dataclass(frozen=True)
class Rect:
    """Axis-aligned room in inclusive pixel coordinates."""

    x_min: int
    y_min: int
    x_max: int
    y_max: int
    room_type: RoomType = RoomType.UNKNOWN

    def __post_init__(self):
        object.__setattr__(self, "room_type", RoomType.parse(self.room_type))
        for name in ("x_min", "y_min", "x_max", "y_max"):
            object.__setattr__(self, name, int(getattr(self, name)))
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise InputError(f"degenerate rectangle {self}")

    def validate(self, canvas: int = CANVAS) -> None:
        if self.x_min < 0 or self.y_min < 0 or self.x_max >= canvas or self.y_max >= canvas:
            raise InputError(f"{self} outside the {canvas}x{canvas} canvas")

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def translate(self, dx: int, dy: int) -> "Rect":
        return Rect(self.x_min + dx, self.y_min + dy, self.x_max + dx, self.y_max + dy, self.room_type)

    def mask(self, canvas: int = CANVAS) -> np.ndarray:
        m = np.zeros((canvas, canvas))
        m[self.y_min:self.y_max + 1, self.x_min:self.x_max + 1] = 1.0
        return m

    def to_json(self) -> dict:
        return {"type": self.room_type.label, "rect": [self.x_min, self.y_min, self.x_max, self.y_max]}

    @classmethod
    def from_json(cls, doc: dict) -> "Rect":
        x0, y0, x1, y1 = doc["rect"]
        return cls(x0, y0, x1, y1, RoomType.parse(doc["type"]))


def layout_to_json(rooms: Sequence[Rect]) -> dict:
    return {"rooms": [r.to_json() for r in rooms]}


def layout_from_json(doc: dict) -> list[Rect]:
    return [Rect.from_json(r) for r in doc["rooms"]]


def shortest_distance_matrix(g: BubbleDiagram) -> np.ndarray:
    """BFS hop counts between all node pairs; 0 on the diagonal, -1 if unreachable."""
    n = len(g.nodes)
    adj = [g.neighbors(i) for i in range(n)]
    dist = np.full((n, n), -1, dtype=np.int64)
    for src in range(n):
        dist[src, src] = 0
        queue = deque([src])
        while queue:
            u = queue.popleft()
            for v in adj[u]:
                if dist[src, v] < 0:
                    dist[src, v] = dist[src, u] + 1
                    queue.append(v)
    return dist


def _interval_relation(a0: int, a1: int, b0: int, b1: int) -> tuple[int, int]:
    """(gap, overlap) between inclusive pixel intervals; gap < 0 when they overlap."""
    overlap = min(a1, b1) - max(a0, b0) + 1
    gap = max(b0 - a1, a0 - b1) - 1
    return gap, overlap


def rooms_adjacent(a: Rect, b: Rect, gap: int = ADJ_GAP, overlap: int = ADJ_OVERLAP) -> bool:
    gap_x, ov_x = _interval_relation(a.x_min, a.x_max, b.x_min, b.x_max)
    gap_y, ov_y = _interval_relation(a.y_min, a.y_max, b.y_min, b.y_max)
    if ov_x > 0 and ov_y > 0:
        return True
    if gap_x <= gap and ov_y >= overlap:
        return True
    return gap_y <= gap and ov_x >= overlap


def extract_bubble_diagram(layout: Sequence[Rect], gap: int = ADJ_GAP, overlap: int = ADJ_OVERLAP) -> BubbleDiagram:
    """One node per rectangle; an edge for every spatially adjacent pair."""
    edges = [
        (i, j)
        for i in range(len(layout))
        for j in range(i + 1, len(layout))
        if rooms_adjacent(layout[i], layout[j], gap, overlap)
    ]
    return BubbleDiagram([r.room_type for r in layout], edges)
