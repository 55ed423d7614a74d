"""Report figures written next to the tabular outputs."""
from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

# fixed metadata keeps the PNG bytes reproducible
_META = {"Software": None}


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=8)


def plot_losses(losses, path, title="training loss"):
    fig, ax = plt.subplots(figsize=(5, 3), dpi=100)
    ax.plot(np.arange(len(losses)), losses, lw=1.0, color="0.2")
    ax.set_xlabel("batch", fontsize=9)
    ax.set_ylabel("binary cross-entropy", fontsize=9)
    ax.set_title(title, fontsize=10)
    _style(ax)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)


def plot_matrix(m, path, title=None):
    """Taxa x characters heat map; missing cells are drawn light grey."""
    cells = m.cells.astype(float)
    cells[m.cells < 0] = np.nan
    height = max(2.0, 0.18 * len(m.taxa) + 1.0)
    fig, ax = plt.subplots(figsize=(7, height), dpi=100)
    cmap = matplotlib.colormaps["Greys"].copy()
    cmap.set_bad("#e8d8c0")
    ax.imshow(np.ma.masked_invalid(cells), aspect="auto", interpolation="nearest", cmap=cmap, vmin=0, vmax=1.4)
    ax.set_yticks(range(len(m.taxa)))
    ax.set_yticklabels(m.taxa, fontsize=6)
    ax.set_xlabel(f"{len(m.labels)} characters", fontsize=9)
    if title:
        ax.set_title(title, fontsize=10)
    ax.tick_params(labelsize=6)
    fig.tight_layout()
    fig.savefig(path, metadata=_META)
    plt.close(fig)
