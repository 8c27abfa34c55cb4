"""Matplotlib figures for training curves, layout grids and score histograms.

All functions render off-screen (Agg) and write straight to a file.
"""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.patches import Patch  # noqa: E402

from .evaluation import PALETTE  # noqa: E402
from .graph import RoomType  # noqa: E402

PathLike = Union[str, Path]


def plot_loss_curves(log: Sequence[dict], path: PathLike, smooth: int = 25) -> Path:
    """One panel per logged loss, raw values plus a moving average."""
    keys = [k for k in ("loss_d", "loss_g_adv", "loss_cls", "loss_gcyc") if log and k in log[0]]
    fig, axes = plt.subplots(1, max(len(keys), 1), figsize=(3.2 * max(len(keys), 1), 2.8), squeeze=False)
    steps = np.array([r["step"] for r in log])
    for ax, key in zip(axes[0], keys):
        values = np.array([r[key] for r in log], dtype=float)
        ax.plot(steps, values, lw=0.6, alpha=0.35, color="tab:blue")
        if len(values) >= smooth > 1:
            kernel = np.ones(smooth) / smooth
            ax.plot(steps[smooth - 1:], np.convolve(values, kernel, mode="valid"), lw=1.4, color="tab:blue")
        ax.set_title(key)
        ax.set_xlabel("step")
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_layout_grid(rasters: Sequence[np.ndarray], path: PathLike, titles: Optional[Sequence[str]] = None,
                     columns: int = 8) -> Path:
    """Tile rasterized layouts with a shared room-type legend."""
    n = max(len(rasters), 1)
    cols = min(columns, n)
    rows = int(np.ceil(n / cols))
    fig, axes = plt.subplots(rows, cols, figsize=(1.4 * cols, 1.5 * rows + 0.8), squeeze=False)
    for k, ax in enumerate(axes.flat):
        ax.axis("off")
        if k < len(rasters):
            ax.imshow(rasters[k], interpolation="nearest")
            if titles is not None:
                ax.set_title(titles[k], fontsize=7)
    handles = [Patch(color=np.array(c) / 255.0, label=t.label) for t, c in zip(RoomType, PALETTE)]
    fig.legend(handles=handles, loc="lower center", ncol=5, fontsize=6, frameon=False)
    fig.tight_layout(rect=(0, 0.12, 1, 1))
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_compatibility_histogram(scores: Sequence[float], path: PathLike,
                                 baseline: Optional[Sequence[float]] = None) -> Path:
    """Histogram of per-layout edit distances, optionally against a baseline run."""
    fig, ax = plt.subplots(figsize=(4, 3))
    hi = int(max(list(scores) + list(baseline or [0]))) + 1
    bins = np.arange(0, hi + 1) - 0.5
    if baseline is not None:
        ax.hist(baseline, bins=bins, alpha=0.5, label=f"before (mean {np.mean(baseline):.2f})")
    ax.hist(scores, bins=bins, alpha=0.7, label=f"after (mean {np.mean(scores):.2f})" if baseline is not None
            else f"mean {np.mean(scores):.2f}")
    ax.set_xlabel("graph edit distance to input diagram")
    ax.set_ylabel("layouts")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path
