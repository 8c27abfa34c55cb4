"""Synthetic bubble-diagram/layout pairs and their newline-delimited JSON storage."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence, Union

import numpy as np

from .errors import InputError
from .graph import CANVAS, NUM_ROOM_TYPES, BubbleDiagram, Rect, RoomType, extract_bubble_diagram

SUBSETS: dict[str, tuple[int, int]] = {
    "1-3": (1, 3),
    "4-6": (4, 6),
    "7-9": (7, 9),
    "10-12": (10, 12),
    # capped at the exact-GED node limit so every sample stays scorable
    "13+": (13, 13),
}

DATASET_FORMAT = "floorgen-dataset"
DATASET_VERSION = 1


@dataclass(frozen=True)
class Sample:
    diagram: BubbleDiagram
    rooms: tuple[Rect, ...]

    @property
    def types(self) -> list[RoomType]:
        return list(self.diagram.nodes)

    def masks(self, canvas: int = CANVAS) -> np.ndarray:
        """Binary ``(rooms, canvas, canvas)`` stack, one filled rectangle per room."""
        if not self.rooms:
            return np.zeros((0, canvas, canvas))
        return np.stack([r.mask(canvas) for r in self.rooms])

    def to_json(self) -> dict:
        return {"diagram": self.diagram.to_json(), "rooms": [r.to_json() for r in self.rooms]}

    @classmethod
    def from_json(cls, doc: dict) -> "Sample":
        return cls(BubbleDiagram.from_json(doc["diagram"]), tuple(Rect.from_json(r) for r in doc["rooms"]))


@dataclass(frozen=True)
class DatasetSpec:
    count: int = 64
    subset: str = "4-6"
    seed: int = 0
    type_weights: Optional[tuple[float, ...]] = None
    # cut positions are multiples of ``grid`` pixels
    grid: int = 1
    min_side: int = 2
    max_deleted: int = 2

    def __post_init__(self):
        if self.subset not in SUBSETS:
            raise InputError(f"unknown subset {self.subset!r}; expected one of {sorted(SUBSETS)}")
        if self.type_weights is not None and len(self.type_weights) != NUM_ROOM_TYPES:
            raise InputError(f"type_weights needs {NUM_ROOM_TYPES} entries")
        if self.count < 0 or self.grid < 1 or self.min_side < 2:
            raise InputError("count >= 0, grid >= 1 and min_side >= 2 required")

    @property
    def room_range(self) -> tuple[int, int]:
        return SUBSETS[self.subset]


def _split_options(cell, grid: int, min_side: int):
    x0, y0, x1, y1 = cell
    opts = []
    # vertical cut at x = c: left [x0, c-1], right [c, x1]
    for c in range(x0 + min_side, x1 - min_side + 2):
        if c % grid == 0:
            opts.append(("x", c))
    for c in range(y0 + min_side, y1 - min_side + 2):
        if c % grid == 0:
            opts.append(("y", c))
    return opts


def _guillotine(rng: np.random.Generator, cells_wanted: int, grid: int, min_side: int):
    cells = [(0, 0, CANVAS - 1, CANVAS - 1)]
    while len(cells) < cells_wanted:
        splittable = [(i, _split_options(c, grid, min_side)) for i, c in enumerate(cells)]
        splittable = [(i, o) for i, o in splittable if o]
        if not splittable:
            return None
        areas = np.array([(cells[i][2] - cells[i][0] + 1) * (cells[i][3] - cells[i][1] + 1) for i, _ in splittable],
                         dtype=float)
        pick = rng.choice(len(splittable), p=areas / areas.sum())
        idx, opts = splittable[pick]
        x0, y0, x1, y1 = cells[idx]
        w, h = x1 - x0 + 1, y1 - y0 + 1
        # favour cutting across the longer side
        want = "x" if (w > h) == (rng.random() < 0.8) else "y"
        axis_opts = [o for o in opts if o[0] == want] or opts
        axis, c = axis_opts[rng.integers(len(axis_opts))]
        if axis == "x":
            parts = [(x0, y0, c - 1, y1), (c, y0, x1, y1)]
        else:
            parts = [(x0, y0, x1, c - 1), (x0, c, x1, y1)]
        cells[idx:idx + 1] = parts
    return cells


def synthesize_sample(spec: DatasetSpec, seed) -> Sample:
    """Guillotine-partition the canvas, drop a few cells, and type the survivors.

    The diagram is read back off the layout with :func:`extract_bubble_diagram`,
    so the diagram/layout round trip holds by construction.
    """
    rng = np.random.default_rng(seed)
    lo, hi = spec.room_range
    weights = None
    if spec.type_weights is not None:
        w = np.asarray(spec.type_weights, dtype=float)
        weights = w / w.sum()
    while True:
        k = int(rng.integers(lo, hi + 1))
        deleted = int(rng.integers(0, spec.max_deleted + 1)) if k > 1 else 0
        cells = _guillotine(rng, k + deleted, spec.grid, spec.min_side)
        if cells is None:
            continue
        order = rng.permutation(len(cells))
        kept = sorted(order[:k])
        types = rng.choice(NUM_ROOM_TYPES, size=k, p=weights)
        rooms = tuple(Rect(*cells[c], RoomType(int(t))) for c, t in zip(kept, types))
        if any(r.width < 2 or r.height < 2 for r in rooms):
            continue
        return Sample(extract_bubble_diagram(rooms), rooms)


def synthesize_dataset(spec: DatasetSpec) -> list[Sample]:
    return [synthesize_sample(spec, [spec.seed, i]) for i in range(spec.count)]


def dumps_dataset(samples: Iterable[Sample]) -> str:
    lines = [json.dumps({"format": DATASET_FORMAT, "version": DATASET_VERSION})]
    lines += [json.dumps(s.to_json(), sort_keys=True) for s in samples]
    return "\n".join(lines) + "\n"


def loads_dataset(text: str) -> list[Sample]:
    lines = text.splitlines()
    if not lines:
        raise InputError("line 1: missing dataset header")
    try:
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise InputError(f"line 1: malformed header: {exc}") from exc
    if not isinstance(header, dict) or header.get("format") != DATASET_FORMAT:
        raise InputError("line 1: not a dataset file")
    if header.get("version") != DATASET_VERSION:
        raise InputError(f"line 1: unsupported dataset version {header.get('version')!r}")
    samples = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            samples.append(Sample.from_json(json.loads(line)))
        except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
            raise InputError(f"line {lineno}: malformed sample: {exc}") from exc
    return samples


def save_dataset(path: Union[str, Path], samples: Sequence[Sample]) -> None:
    Path(path).write_text(dumps_dataset(samples))


def load_dataset(path: Union[str, Path]) -> list[Sample]:
    return loads_dataset(Path(path).read_text())


def downsample_masks(masks: np.ndarray, size: int) -> np.ndarray:
    """Average-pool ``(R, C, C)`` masks down to ``(R, size, size)``."""
    r, c, _ = masks.shape
    if c == size:
        return masks.copy()
    if c % size:
        raise InputError(f"cannot pool {c}x{c} masks to {size}x{size}")
    f = c // size
    return masks.reshape(r, size, f, size, f).mean(axis=(2, 4))
