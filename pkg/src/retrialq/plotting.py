"""Log-log SVG figures of exact tails against their asymptotes.

Output is byte-reproducible: the SVG id salt is fixed and no date is written.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

__all__ = ["tail_plot"]

_STYLE = {
    "svg.hashsalt": "retrialq",
    "svg.fonttype": "path",
    "font.size": 9,
    "axes.grid": True,
    "grid.alpha": 0.3,
    "grid.linewidth": 0.5,
}


def tail_plot(path, j, tails: dict, asymptotes: dict | None = None, *, title: str = "") -> Path:
    """Write a log-log plot of ``tails[name][j]`` with dashed ``asymptotes[name]``.

    Points with nonpositive values are dropped (log axes).
    """
    path = Path(path)
    j = np.asarray(j, dtype=float)
    asymptotes = asymptotes or {}
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(6.0, 4.5))
        for i, (name, y) in enumerate(tails.items()):
            y = np.asarray(y, dtype=float)
            ok = (j > 0) & (y > 0)
            color = f"C{i % 10}"
            ax.loglog(j[ok], y[ok], color=color, lw=1.2, label=name)
            if name in asymptotes:
                a = np.asarray(asymptotes[name], dtype=float)
                ok = (j > 0) & (a > 0)
                ax.loglog(j[ok], a[ok], color=color, lw=0.8, ls="--")
        if asymptotes:
            ax.loglog([], [], color="0.4", lw=0.8, ls="--", label="asymptote")
        ax.set_xlabel("j")
        ax.set_ylabel("tail probability P{ . > j}")
        if title:
            ax.set_title(title)
        ax.legend(frameon=False, fontsize=8)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
        plt.close(fig)
    return path
