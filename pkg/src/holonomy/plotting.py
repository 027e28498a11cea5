"""Figure rendering for CLI reports (written to files, never shown)."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

__all__ = ["save_matrix_figure", "save_sweep_figure"]


def save_matrix_figure(matrices: dict[str, np.ndarray], path: str, title: str = ""):
    """Magnitude/phase panels for each named matrix, one row per matrix."""
    names = list(matrices)
    fig, axes = plt.subplots(
        len(names), 2, figsize=(6.4, 2.6 * len(names)), squeeze=False
    )
    for row, name in enumerate(names):
        m = np.asarray(matrices[name])
        im0 = axes[row, 0].imshow(np.abs(m), vmin=0.0, vmax=1.0, cmap="viridis")
        axes[row, 0].set_title(f"|{name}|")
        fig.colorbar(im0, ax=axes[row, 0], fraction=0.046)
        im1 = axes[row, 1].imshow(
            np.angle(m), vmin=-np.pi, vmax=np.pi, cmap="twilight"
        )
        axes[row, 1].set_title(f"arg {name}")
        fig.colorbar(im1, ax=axes[row, 1], fraction=0.046)
        for ax in axes[row]:
            ax.set_xticks(range(m.shape[1]))
            ax.set_yticks(range(m.shape[0]))
    if title:
        fig.suptitle(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def save_sweep_figure(kicks, deviations, path: str, title: str = ""):
    """Deviation vs number of kicks on log-log axes with a 1/L guide."""
    kicks = np.asarray(kicks, dtype=float)
    dev = np.asarray(deviations, dtype=float)
    fig, ax = plt.subplots(figsize=(5.2, 3.6))
    ax.loglog(kicks, dev, "o-", label="deviation")
    guide = dev[0] * kicks[0] / kicks
    ax.loglog(kicks, guide, "k--", alpha=0.5, label="1/L guide")
    ax.set_xlabel("kicks L")
    ax.set_ylabel("operator-norm deviation")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
