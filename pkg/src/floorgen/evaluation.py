"""Compatibility, rasterization and the histogram diversity proxy."""

from __future__ import annotations

import json
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, Union

import numpy as np

from .errors import InputError
from .ged import graph_edit_distance
from .graph import CANVAS, BubbleDiagram, Rect, extract_bubble_diagram

WHITE = (255, 255, 255)

# One distinct, non-white color per room type, indexed by type code.
PALETTE: tuple[tuple[int, int, int], ...] = (
    (238, 77, 77),    # living room
    (192, 119, 42),   # kitchen
    (255, 214, 0),    # bedroom
    (0, 160, 160),    # bathroom
    (120, 80, 200),   # closet
    (80, 180, 60),    # balcony
    (150, 150, 150),  # corridor
    (40, 90, 220),    # dining room
    (230, 120, 200),  # laundry room
    (60, 60, 60),     # unknown
)


def compatibility(diagram: BubbleDiagram, layout: Sequence[Rect]) -> int:
    """Edit distance between a diagram and the diagram read off a layout."""
    if not layout:
        raise InputError("compatibility needs a non-empty layout")
    return graph_edit_distance(diagram, extract_bubble_diagram(layout))


def paint_order(layout: Sequence[Rect]) -> list[Rect]:
    """Largest area first; ties by room-type code, then coordinates."""
    return sorted(layout, key=lambda r: (-r.area, int(r.room_type), r.x_min, r.y_min, r.x_max, r.y_max))


def rasterize(layout: Sequence[Rect], canvas: int = CANVAS) -> np.ndarray:
    """``(canvas, canvas, 3)`` uint8 image: white background, rooms painted largest first."""
    img = np.empty((canvas, canvas, 3), dtype=np.uint8)
    img[:] = WHITE
    for r in paint_order(layout):
        img[r.y_min:r.y_max + 1, r.x_min:r.x_max + 1] = PALETTE[int(r.room_type)]
    return img


def type_histogram(raster: np.ndarray) -> np.ndarray:
    """Fraction of pixels painted in each room type's color (10 bins)."""
    pixels = raster.reshape(-1, 3)
    hist = np.array([np.all(pixels == np.array(c, dtype=np.uint8), axis=1).sum() for c in PALETTE], dtype=float)
    return hist / len(pixels)


def diversity_proxy(rasters: Sequence[np.ndarray]) -> float:
    """Mean L2 distance between type-coverage histograms over all ordered pairs.

    Self-pairs are included, which makes the value invariant to duplicating
    the whole set. This is a structural stand-in for FID and is not
    comparable to FID values.
    """
    if len(rasters) < 2:
        raise InputError("diversity needs at least two rasters")
    hists = np.stack([type_histogram(r) for r in rasters])
    diff = hists[:, None, :] - hists[None, :, :]
    return float(np.sqrt((diff ** 2).sum(axis=2)).mean())


@dataclass
class EvalReport:
    compatibility: list[int]
    diversity: float
    records: list[dict] = field(default_factory=list)

    @property
    def mean_compatibility(self) -> float:
        return float(np.mean(self.compatibility)) if self.compatibility else float("nan")

    @property
    def median_compatibility(self) -> float:
        return float(statistics.median(self.compatibility)) if self.compatibility else float("nan")

    def to_json(self) -> dict:
        return {
            "mean_compatibility": self.mean_compatibility,
            "median_compatibility": self.median_compatibility,
            "diversity_proxy": self.diversity,
            "diversity_note": "type-coverage histogram distance; not comparable to FID",
            "samples": self.records,
        }


def evaluate_layouts(diagrams: Sequence[BubbleDiagram], layouts: Sequence[Sequence[Rect]]) -> EvalReport:
    if len(diagrams) != len(layouts):
        raise InputError(f"{len(diagrams)} diagrams but {len(layouts)} layouts")
    scores, records, rasters = [], [], []
    for i, (d, layout) in enumerate(zip(diagrams, layouts)):
        score = compatibility(d, layout)
        scores.append(score)
        records.append({"index": i, "rooms": len(layout), "compatibility": score})
        rasters.append(rasterize(layout))
    diversity = diversity_proxy(rasters) if len(rasters) >= 2 else float("nan")
    return EvalReport(scores, diversity, records)


def write_ppm(path: Union[str, Path], image: np.ndarray) -> None:
    """Binary P6 PPM."""
    image = np.asarray(image, dtype=np.uint8)
    h, w, _ = image.shape
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(image.tobytes())


def write_pgm(path: Union[str, Path], mask: np.ndarray) -> None:
    """Binary P5 PGM of a ``[0, 1]`` mask."""
    data = np.clip(np.round(np.asarray(mask) * 255.0), 0, 255).astype(np.uint8)
    h, w = data.shape
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode("ascii"))
        fh.write(data.tobytes())


def read_pnm(path: Union[str, Path]) -> np.ndarray:
    """Read back P5/P6 files written by :func:`write_pgm` / :func:`write_ppm`."""
    raw = Path(path).read_bytes()
    parts = raw.split(maxsplit=4)
    magic, w, h, _maxval, body = parts[0], int(parts[1]), int(parts[2]), parts[3], parts[4]
    channels = 3 if magic == b"P6" else 1
    arr = np.frombuffer(body[: w * h * channels], dtype=np.uint8)
    return arr.reshape(h, w, 3) if channels == 3 else arr.reshape(h, w)


def write_report(path: Union[str, Path], report: EvalReport) -> None:
    Path(path).write_text(json.dumps(report.to_json(), indent=2))
