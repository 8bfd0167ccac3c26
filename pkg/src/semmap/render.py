"""Matplotlib rendering of maps, tours and evaluation summaries to PNG files.

Figures are written with fixed dpi and stripped metadata so identical
inputs produce identical bytes.
"""
from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .evaluation import APResult, MatchReport  # noqa: E402
from .mapping import FREE, OCCUPIED, TrinaryGrid  # noqa: E402
from .semantic_map import TopologicalMap  # noqa: E402
from .traversal import Tour  # noqa: E402

# fixed per-category marker styling; unknown categories cycle deterministically
CATEGORY_STYLE = {
    "chair": ("tab:red", "o"),
    "table": ("tab:blue", "s"),
    "door": ("tab:green", "^"),
}
_FALLBACK_COLORS = ("tab:orange", "tab:purple", "tab:brown", "tab:pink", "tab:cyan")

_SAVE_KWARGS = {"dpi": 110, "metadata": {"Software": None}}


def _style_for(category: str, index: int) -> tuple[str, str]:
    if category in CATEGORY_STYLE:
        return CATEGORY_STYLE[category]
    return _FALLBACK_COLORS[index % len(_FALLBACK_COLORS)], "D"


def _occupancy_image(grid: TrinaryGrid) -> np.ndarray:
    img = np.full(grid.meta.shape, 205, dtype=np.uint8)
    img[grid.cells == FREE] = 254
    img[grid.cells == OCCUPIED] = 0
    return img


def render_map(grid: TrinaryGrid, out_path, topo: TopologicalMap | None = None,
               tour: Tour | None = None, title: str | None = None) -> Path:
    """Grayscale occupancy raster with node markers and an optional tour line."""
    out_path = Path(out_path)
    x_min, x_max, y_min, y_max = grid.meta.world_extent()
    fig, ax = plt.subplots(figsize=(7.0, 7.0 * grid.meta.height / max(1, grid.meta.width)))
    ax.imshow(_occupancy_image(grid), cmap="gray", vmin=0, vmax=255,
              origin="lower", extent=(x_min, x_max, y_min, y_max),
              interpolation="nearest")
    if tour is not None:
        xs = [p.x for p in tour.waypoints]
        ys = [p.y for p in tour.waypoints]
        ax.plot(xs, ys, color="tab:olive", linewidth=1.0, alpha=0.9, zorder=2,
                label=f"tour ({tour.total_length:.1f} m)")
        ax.plot(xs[0], ys[0], marker="*", color="black", markersize=10, zorder=4)
    if topo is not None:
        cats = sorted({n.category for n in topo})
        for i, cat in enumerate(cats):
            color, marker = _style_for(cat, i)
            pts = [(n.position[0], n.position[1]) for n in topo if n.category == cat]
            ax.scatter([p[0] for p in pts], [p[1] for p in pts], s=28, c=color,
                       marker=marker, edgecolors="black", linewidths=0.5,
                       zorder=3, label=f"{cat} ({len(pts)})")
    if topo is not None or tour is not None:
        ax.legend(loc="upper right", fontsize=8, framealpha=0.9)
    ax.set_xlabel("x [m]")
    ax.set_ylabel("y [m]")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)
    return out_path


def render_eval(stage_counts: dict[str, dict[str, tuple[int, int]]],
                stage_metrics: dict[str, tuple[MatchReport, APResult]],
                out_path, title: str | None = None) -> Path:
    """Two-panel summary: GT vs mapped counts, and per-category AP, per stage."""
    out_path = Path(out_path)
    cats = sorted({c for counts in stage_counts.values() for c in counts})
    stages = list(stage_counts)
    fig, (ax_counts, ax_ap) = plt.subplots(1, 2, figsize=(11, 4.2))

    n_groups = max(1, len(cats))
    group_w = 0.8
    bar_w = group_w / max(1, (len(stages) * 2))
    xs = np.arange(n_groups)
    for si, stage in enumerate(stages):
        gts = [stage_counts[stage].get(c, (0, 0))[0] for c in cats]
        maps = [stage_counts[stage].get(c, (0, 0))[1] for c in cats]
        off = -group_w / 2 + (2 * si) * bar_w
        ax_counts.bar(xs + off, gts, bar_w, color="lightgray", edgecolor="black",
                      linewidth=0.4, label=f"{stage} GT" if si == 0 else None)
        ax_counts.bar(xs + off + bar_w, maps, bar_w, color="tab:blue",
                      edgecolor="black", linewidth=0.4,
                      label=f"{stage} mapped" if si == 0 else None)
    ax_counts.set_xticks(xs, cats)
    ax_counts.set_ylabel("object count")
    ax_counts.set_title("ground truth vs mapped")
    ax_counts.legend(fontsize=8)

    for si, stage in enumerate(stages):
        _, ap = stage_metrics[stage]
        vals = [ap.per_category.get(c, 0.0) for c in cats]
        off = -group_w / 2 + si * (group_w / max(1, len(stages)))
        ax_ap.bar(xs + off, vals, group_w / max(1, len(stages)),
                  label=stage, edgecolor="black", linewidth=0.4)
    ax_ap.set_xticks(xs, cats)
    ax_ap.set_ylim(0.0, 1.05)
    ax_ap.set_ylabel("average precision")
    ax_ap.set_title("per-category AP")
    ax_ap.legend(fontsize=8)

    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(out_path, **_SAVE_KWARGS)
    plt.close(fig)
    return out_path
