"""Optional SVG figures: joint-track repair panels and confusion matrices."""

from __future__ import annotations

import numpy as np


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "lidargait"
    return plt


def _save(fig, path):
    fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})


def plot_track_repair(raw, corrected, smoothed, path, title: str = "") -> None:
    """Three stacked panels: raw track, after correction, after smoothing."""
    plt = _pyplot()
    fig, axes = plt.subplots(3, 1, figsize=(7, 6), sharex=True)
    for ax, values, label in zip(axes, (raw, corrected, smoothed),
                                 ("raw", "corrected", "smoothed")):
        ax.plot(np.arange(len(values)), values, lw=1.0)
        ax.set_ylabel(label)
    axes[-1].set_xlabel("frame")
    if title:
        axes[0].set_title(title)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)


def plot_confusion(labels, matrix, path, title: str = "") -> None:
    plt = _pyplot()
    m = np.asarray(matrix)
    fig, ax = plt.subplots(figsize=(1 + 0.5 * len(labels), 1 + 0.5 * len(labels)))
    ax.imshow(m, cmap="Blues")
    ax.set_xticks(range(len(labels)), labels, rotation=90)
    ax.set_yticks(range(len(labels)), labels)
    for i in range(m.shape[0]):
        for j in range(m.shape[1]):
            if m[i, j]:
                ax.text(j, i, str(m[i, j]), ha="center", va="center", fontsize=8)
    ax.set_xlabel("predicted")
    ax.set_ylabel("true")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    _save(fig, path)
    plt.close(fig)
