"""Matplotlib figures for ROC reports and sweeps. Always renders off-screen."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

matplotlib.rcParams["pdf.fonttype"] = 42
matplotlib.rcParams["axes.grid"] = True
matplotlib.rcParams["grid.linestyle"] = ":"

SURFACE_NAMES = {"tm": "TM-MIA", "sp": "SP-MIA"}


def new_fig(width=5.0, height=4.0):
    fig, ax = plt.subplots(figsize=(width, height))
    return fig, ax


def save_fig(fig, path, dpi=150):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_roc(reports, path, log_scale=False):
    """Overlay ROC curves, one per surface, with the chance diagonal."""
    fig, ax = new_fig()
    for rep in reports:
        name = SURFACE_NAMES.get(rep.surface.value if rep.surface else "", "scores")
        ax.plot(rep.curve[:, 0], rep.curve[:, 1], drawstyle="steps-post", label=f"{name} (AUC={rep.auc:.3f})")
    if log_scale:
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlim(1e-3, 1)
        ax.set_ylim(1e-3, 1)
    else:
        ax.plot([0, 1], [0, 1], color="0.6", lw=0.8, ls="--")
        ax.set_xlim(0, 1)
        ax.set_ylim(0, 1)
    ax.set_xlabel("False positive rate")
    ax.set_ylabel("True positive rate")
    ax.legend(loc="lower right", fontsize=8)
    return save_fig(fig, path)


def plot_sweep(rows, axis, path, metric="auc"):
    """Metric against the swept value, one line per surface.

    ``rows`` are dicts with at least ``value``, ``surface`` and ``metric``.
    """
    fig, ax = new_fig()
    by_surface = {}
    for row in rows:
        by_surface.setdefault(row["surface"], []).append((float(row["value"]), float(row[metric])))
    for surf, pts in sorted(by_surface.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", label=SURFACE_NAMES.get(surf, surf))
    ax.set_xlabel(axis)
    ax.set_ylabel(metric.upper() if metric == "auc" else metric)
    if metric == "auc":
        ax.axhline(0.5, color="0.6", lw=0.8, ls="--")
    ax.legend(fontsize=8)
    return save_fig(fig, path)
