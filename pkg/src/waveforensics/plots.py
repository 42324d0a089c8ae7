"""Figure rendering for reports: ROC curves, training history, metric bars.

Everything is written as SVG with a pinned hash salt and no Date metadata,
so rerunning a command with the same inputs yields byte-identical files.
"""

from typing import Dict, Sequence

import matplotlib

matplotlib.use("Agg")
matplotlib.rcParams["svg.hashsalt"] = "waveforensics"

import matplotlib.pyplot as plt
import numpy as np

from .classifier import TrainHistory
from .metrics import RocCurve

_TICKS = np.arange(0.0, 1.01, 0.2)
_COLORS = {"spatial": "#777777", "haar": "#1f77b4", "db2": "#d62728"}


def _save(fig, path: str) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def save_roc_figure(curves: Dict[str, RocCurve], path: str) -> None:
    """One or more ROC polylines on shared [0, 1] axes, ticks every 0.2."""
    fig, ax = plt.subplots(figsize=(5.0, 5.0))
    ax.plot([0, 1], [0, 1], linestyle=":", color="#bbbbbb", linewidth=1)
    for name, curve in curves.items():
        color = _COLORS.get(name)
        ax.plot(curve.fpr, curve.tpr, label=name, color=color, linewidth=1.6)
    ax.set_xlim(0, 1)
    ax.set_ylim(0, 1.02)
    ax.set_xticks(_TICKS)
    ax.set_yticks(_TICKS)
    ax.set_xlabel("false positive rate")
    ax.set_ylabel("true positive rate")
    ax.grid(True, linewidth=0.4, alpha=0.5)
    ax.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)


def save_history_figure(history: TrainHistory, path: str) -> None:
    """Train/validation loss curves with the checkpoint epoch marked."""
    epochs = [r.epoch for r in history.records]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    ax.plot(epochs, [r.train_loss for r in history.records],
            label="train loss", color="#1f77b4", linewidth=1.4)
    ax.plot(epochs, [r.val_loss for r in history.records],
            label="validation loss", color="#d62728", linewidth=1.4)
    best = history.best_epoch()
    ax.axvline(best, color="#2ca02c", linestyle="--", linewidth=1,
               label=f"checkpoint (epoch {best})")
    ax.set_xlabel("epoch")
    ax.set_ylabel("binary cross-entropy")
    ax.grid(True, linewidth=0.4, alpha=0.5)
    ax.legend()
    fig.tight_layout()
    _save(fig, path)


def save_metric_bars(rows: Sequence[dict], path: str) -> None:
    """Grouped bars, one group per metric, one bar per domain row.

    Each row needs keys: domain, accuracy, f1, auc, ap.
    """
    metric_names = ["accuracy", "f1", "auc", "ap"]
    fig, ax = plt.subplots(figsize=(6.5, 4.0))
    n_rows = len(rows)
    width = 0.8 / max(n_rows, 1)
    base = np.arange(len(metric_names))
    for i, row in enumerate(rows):
        xs = base + (i - (n_rows - 1) / 2) * width
        ys = [row[m] for m in metric_names]
        ax.bar(xs, ys, width=width * 0.92, label=row["domain"],
               color=_COLORS.get(row["domain"]))
    ax.set_xticks(base)
    ax.set_xticklabels(metric_names)
    ax.set_ylim(0, 1.05)
    ax.set_ylabel("score")
    ax.grid(True, axis="y", linewidth=0.4, alpha=0.5)
    ax.legend(loc="lower right")
    fig.tight_layout()
    _save(fig, path)
