"""Figure rendering for run and sweep outputs."""

from __future__ import annotations

from pathlib import Path
from typing import Optional, Sequence, Union

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
from matplotlib.patches import Rectangle

from .geometry import Hyperrect

__all__ = ["save_sets_figure", "save_sweep_figure"]


def _add_boxes(ax, boxes: Sequence[Hyperrect], dims: tuple[int, int],
               cmap_name: str, label: str, filled: bool) -> None:
    cmap = plt.get_cmap(cmap_name)
    n = len(boxes)
    for t, box in enumerate(boxes):
        i, j = dims
        color = cmap(0.25 + 0.7 * t / max(n - 1, 1))
        ax.add_patch(Rectangle(
            (box.lo[i], box.lo[j]), box.widths[i], box.widths[j],
            facecolor=color if filled else "none",
            edgecolor=color, alpha=0.45 if filled else 1.0,
            linewidth=1.0, linestyle="-" if filled else "--",
            label=label if t == 0 else None,
        ))


def save_sets_figure(sets: Sequence[Hyperrect], path: Union[str, Path],
                     hulls: Optional[Sequence[Hyperrect]] = None,
                     dims: tuple[int, int] = (0, 1),
                     title: str = "reachable sets") -> Path:
    """Draw computed boxes (and sampled hulls, dashed) over the horizon.

    For 1-d systems a time-vs-interval band is drawn instead of rectangles.
    """
    path = Path(path)
    fig, ax = plt.subplots(figsize=(6.0, 4.5))
    if sets and sets[0].dim == 1:
        ts = range(1, len(sets) + 1)
        ax.fill_between(ts, [b.lo[0] for b in sets], [b.hi[0] for b in sets],
                        alpha=0.4, label="computed")
        if hulls:
            ax.plot(ts, [h.lo[0] for h in hulls], "k--", linewidth=0.8)
            ax.plot(ts, [h.hi[0] for h in hulls], "k--", linewidth=0.8,
                    label="sampled hull")
        ax.set_xlabel("time step")
        ax.set_ylabel("x0")
    else:
        _add_boxes(ax, sets, dims, "viridis", "computed", filled=True)
        if hulls:
            _add_boxes(ax, hulls, dims, "Greys", "sampled hull", filled=False)
        ax.set_xlabel(f"x{dims[0]}")
        ax.set_ylabel(f"x{dims[1]}")
        # patches do not feed autoscaling; register the box corners manually
        for box in list(sets) + (list(hulls) if hulls else []):
            ax.update_datalim([(box.lo[dims[0]], box.lo[dims[1]]),
                               (box.hi[dims[0]], box.hi[dims[1]])])
        ax.autoscale_view()
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def save_sweep_figure(rows: Sequence[dict], path: Union[str, Path],
                      title: str = "error vs budget") -> Path:
    """Error curves against budget; the infinite-budget row plots last."""
    path = Path(path)
    finite = [r for r in rows if r["budget"] != float("inf")]
    inf_rows = [r for r in rows if r["budget"] == float("inf")]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    xs = [r["budget"] for r in finite]
    ax.plot(xs, [r["e_volume"] for r in finite], "o-", label="e_volume")
    ax.plot(xs, [r["e_radius"] for r in finite], "s-", label="e_radius")
    for r in inf_rows:
        ax.axhline(r["e_volume"], color="C0", linestyle=":",
                   label="e_volume (unlimited)")
        ax.axhline(r["e_radius"], color="C1", linestyle=":",
                   label="e_radius (unlimited)")
    ax.set_xlabel("budget [s]")
    ax.set_ylabel("total error ratio")
    ax.set_yscale("log")
    ax.set_title(title)
    ax.legend(loc="best", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
