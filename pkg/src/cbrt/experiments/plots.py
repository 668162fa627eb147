"""
SVG line charts drawn with matplotlib.

Charts are derived artifacts: they read finished frames and never feed back
into CSV output.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

FIGSIZE = (8, 5)
# keep text as <text> elements and ids stable across reruns
SVG_RC = {"svg.fonttype": "none", "svg.hashsalt": "cbrt"}


@dataclass(frozen=True)
class Series:
    label: str
    xs: Sequence[float]
    ys: Sequence[float]


def _positive(series: Sequence[Series]) -> bool:
    ys = np.concatenate([np.asarray(s.ys, dtype=float) for s in series]) if series else np.zeros(0)
    return bool(np.any(np.isfinite(ys) & (ys > 0)))


def draw_chart(series: Sequence[Series], title: str, xlabel: str, ylabel: str, *,
               log_y: bool = False) -> Figure:
    """One line per series with point markers; NaN points break the line.

    A log axis falls back to linear when no series has a positive value.
    The caller closes the figure.
    """
    fig, ax = plt.subplots(figsize=FIGSIZE)
    for s in series:
        ax.plot(np.asarray(s.xs, dtype=float), np.asarray(s.ys, dtype=float),
                marker="o", markersize=4, linewidth=1.5, label=s.label)
    if log_y and _positive(series):
        ax.set_yscale("log")
    ax.set_title(title, fontsize=13, fontweight="bold")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3, linestyle="--")
    if series:
        ax.legend(loc="best", fontsize=10)
    fig.tight_layout()
    return fig


def write_chart(path: str | Path, series: Sequence[Series], title: str, xlabel: str, ylabel: str, *,
                log_y: bool = False) -> Path:
    path = Path(path)
    with plt.rc_context(SVG_RC):
        fig = draw_chart(series, title, xlabel, ylabel, log_y=log_y)
        try:
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path
