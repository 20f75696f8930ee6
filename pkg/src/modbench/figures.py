"""Figure rendering for report outputs.

Renders the per-task delta heatmap, the loss-vs-CLIMB scatter, and
grad-norm trajectories to PNG files. The delimited table emissions remain
the machine-readable source of truth; these are display artifacts written
alongside them. Uses the Agg backend so rendering works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .results import CLIMB_TASKS


def save_heatmap(table, path: str, title: str = "per-task accuracy delta"):
    """Render a per_task_delta ReportTable as a methods x tasks heatmap."""
    if not table.rows:
        raise ValueError("cannot render an empty matrix")
    methods = [row["method"] for row in table.rows]
    data = np.array([[row[t] for t in CLIMB_TASKS] for row in table.rows],
                    dtype=np.float64)
    lim = max(float(np.abs(data).max()), 1e-9)
    fig, ax = plt.subplots(figsize=(10, 0.45 * len(methods) + 2.5))
    im = ax.imshow(data, cmap="RdBu_r", vmin=-lim, vmax=lim, aspect="auto")
    ax.set_xticks(range(len(CLIMB_TASKS)), CLIMB_TASKS,
                  rotation=45, ha="right")
    ax.set_yticks(range(len(methods)), methods)
    fig.colorbar(im, ax=ax, label="accuracy delta vs reference")
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_loss_vs_climb(table, path: str):
    """Scatter of final validation loss against CLIMB-avg, labeled by tag."""
    if not table.rows:
        raise ValueError("cannot render an empty table")
    losses = [row["val_loss"] for row in table.rows]
    climbs = [row["climb_avg"] for row in table.rows]
    fig, ax = plt.subplots(figsize=(7, 5))
    ax.scatter(losses, climbs, color="tab:blue", zorder=3)
    for row in table.rows:
        ax.annotate(row["method"], (row["val_loss"], row["climb_avg"]),
                    textcoords="offset points", xytext=(5, 4), fontsize=8)
    ax.set_xlabel("final validation loss")
    ax.set_ylabel("CLIMB-avg")
    ax.set_title("validation loss vs downstream average")
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def save_grad_norms(records, path: str):
    """Grad-norm trajectories for one or more RunRecords, log-scaled.

    Diverged runs get a dashed marker at the NaN step annotated with the
    classified signature.
    """
    records = list(records)
    if not records:
        raise ValueError("need at least one run record")
    fig, ax = plt.subplots(figsize=(8, 5))
    for rec in records:
        if not rec.steps:
            continue
        steps = [s[0] for s in rec.steps]
        norms = [s[2] for s in rec.steps]
        label = f"{rec.method} (seed {rec.seed})"
        if rec.diverged:
            label += f", {rec.signature} @ {rec.nan_step}"
        line, = ax.plot(steps, norms, label=label)
        if rec.diverged and rec.nan_step is not None:
            ax.axvline(rec.nan_step, color=line.get_color(),
                       linestyle="--", alpha=0.5)
    ax.set_yscale("log")
    ax.set_xlabel("step")
    ax.set_ylabel("grad norm (pre-clip)")
    ax.set_title("gradient-norm trajectories")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
