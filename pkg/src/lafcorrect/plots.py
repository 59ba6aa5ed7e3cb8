"""Render benchmark error grids as heatmap figures on disk."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def save_grid_heatmaps(grids, directory, stem="bench") -> list[Path]:
    """Write one PNG heatmap per grid and return the paths.

    Noise level runs along the horizontal axis, view count along the
    vertical one, matching the grid layout; all grids share one color scale
    so the corrected panels are directly comparable to the input panel.
    """
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    vmax = 0.0
    for grid in grids:
        finite = grid.mean[np.isfinite(grid.mean)]
        if finite.size:
            vmax = max(vmax, float(finite.max()))
    if vmax <= 0.0:
        vmax = 1.0
    paths = []
    for grid in grids:
        fig, ax = plt.subplots(figsize=(4.4, 3.4))
        im = ax.imshow(grid.mean, origin="lower", aspect="auto", cmap="viridis",
                       vmin=0.0, vmax=vmax)
        ax.set_xticks(range(len(grid.sigmas)))
        ax.set_xticklabels([f"{s:g}" for s in grid.sigmas], rotation=45, fontsize=7)
        ax.set_yticks(range(len(grid.view_counts)))
        ax.set_yticklabels([str(v) for v in grid.view_counts], fontsize=7)
        ax.set_xlabel("noise sigma (px)")
        ax.set_ylabel("views")
        ax.set_title(f"{grid.label} ({grid.trials} trials/cell)", fontsize=9)
        fig.colorbar(im, ax=ax, label="mean frame error")
        out = directory / f"{stem}_{grid.label}.png"
        fig.savefig(out, dpi=150, bbox_inches="tight")
        plt.close(fig)
        paths.append(out)
    return paths
