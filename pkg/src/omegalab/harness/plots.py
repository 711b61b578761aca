"""Vector figures for experiment reports.

Figures are drawn on bare ``Figure`` objects (no pyplot state) and saved as
SVG with a fixed hash salt and no date stamp, so identical data gives
byte-identical files.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib
import numpy as np
from matplotlib.backends.backend_svg import FigureCanvasSVG
from matplotlib.figure import Figure

SVG_SALT = "omegalab"


def _save(fig: Figure, path) -> None:
    FigureCanvasSVG(fig)
    with matplotlib.rc_context({"svg.hashsalt": SVG_SALT, "svg.fonttype": "path"}):
        fig.savefig(Path(path), format="svg", metadata={"Date": None})


def ratio_histogram(path, ratios, band: tuple[float, float], title: str = "") -> None:
    """Histogram of observed/predicted ratios with the accepted band shaded."""
    r = np.asarray(ratios, dtype=np.float64)
    r = r[np.isfinite(r)]
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot()
    ax.axvspan(band[0], band[1], color="0.9", zorder=0, label="band")
    if r.size:
        ax.hist(r, bins=min(40, max(5, r.size // 5)), color="tab:blue", zorder=1)
    ax.axvline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xlabel("observed / predicted")
    ax.set_ylabel("samples")
    ax.set_title(title)
    ax.legend(loc="upper right")
    fig.tight_layout()
    _save(fig, path)


def trend_plot(path, lengths, mean_ratios, fractions, title: str = "") -> None:
    """Mean ratio and exceptional fraction as functions of the interval length."""
    fig = Figure(figsize=(6.0, 4.0))
    ax = fig.add_subplot()
    ax.plot(lengths, mean_ratios, "o-", color="tab:blue", label="mean ratio")
    ax.axhline(1.0, color="k", lw=0.8, ls="--")
    ax.set_xscale("log")
    ax.set_xlabel("interval length")
    ax.set_ylabel("mean ratio")
    ax2 = ax.twinx()
    ax2.plot(lengths, fractions, "s:", color="tab:red", label="exceptional fraction")
    ax2.set_ylabel("exceptional fraction")
    ax2.set_ylim(-0.02, 1.02)
    lines = ax.get_lines()[:1] + ax2.get_lines()
    ax.legend(lines, [ln.get_label() for ln in lines], loc="best")
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)


def heatmap(path, table, row_labels, col_labels, title: str = "") -> None:
    """Annotated heat map, used for correlation ratio tables."""
    data = np.asarray(table, dtype=np.float64)
    fig = Figure(figsize=(6.0, 5.0))
    ax = fig.add_subplot()
    im = ax.imshow(data, origin="lower", cmap="viridis")
    ax.set_xticks(range(len(col_labels)), [str(c) for c in col_labels])
    ax.set_yticks(range(len(row_labels)), [str(r) for r in row_labels])
    ax.set_xlabel("k2")
    ax.set_ylabel("k1")
    for (i, j), v in np.ndenumerate(data):
        if np.isfinite(v):
            ax.text(j, i, f"{v:.2f}", ha="center", va="center", fontsize=7, color="w")
    fig.colorbar(im, ax=ax)
    ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
