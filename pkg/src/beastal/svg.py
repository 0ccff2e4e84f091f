"""Line charts written as standalone SVG files."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402


def emit_svg_curve(series, labels, path, *, x=None, logy: bool = False, xlabel: str = "step",
                   ylabel: str = "", title: str = "", markers_every: int | None = None) -> Path:
    """Plot one polyline per entry of ``series`` and save it as SVG.

    ``x`` is a shared abscissa (default ``0..n-1`` per series). With
    ``markers_every`` set, faint vertical lines are drawn at multiples of it
    (epoch boundaries). Output is byte-stable for identical input.
    """
    series = [np.asarray(s, dtype=float) for s in series]
    labels = list(labels)
    if not series or any(s.size == 0 for s in series):
        raise ValueError("need at least one non-empty series")
    if len(labels) != len(series):
        raise ValueError("one label per series required")

    with plt.rc_context({"svg.hashsalt": "beastal", "svg.fonttype": "none"}):
        fig, ax = plt.subplots(figsize=(6, 4))
        try:
            for s, label in zip(series, labels):
                xs = np.arange(s.size) if x is None else np.asarray(x)[: s.size]
                ax.plot(xs, s, label=label, linewidth=1.2)
            if logy:
                ax.set_yscale("log")
            if markers_every:
                hi = max((s.size if x is None else float(np.max(x))) for s in series)
                for m in np.arange(markers_every, hi, markers_every):
                    ax.axvline(m, color="0.85", linewidth=0.5, zorder=0)
            ax.set_xlabel(xlabel)
            ax.set_ylabel(ylabel)
            if title:
                ax.set_title(title)
            if len(series) > 1 or labels[0]:
                ax.legend()
            fig.tight_layout()
            path = Path(path)
            fig.savefig(path, format="svg", metadata={"Date": None})
        finally:
            plt.close(fig)
    return path
