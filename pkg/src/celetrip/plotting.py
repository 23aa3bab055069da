"""Figures written next to the delimited outputs of the command line."""

from __future__ import annotations

from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

_STYLE = {"font.size": 9, "axes.spines.top": False, "axes.spines.right": False, "savefig.dpi": 120}
# keep PNG bytes reproducible across runs
_PNG_META = {"Software": None}


def plot_training_curves(history: Sequence, path: str | Path) -> Path:
    """Loss (left) and F1 (right) per epoch for the training and validation sides."""
    epochs = [r.epoch for r in history]
    with plt.rc_context(_STYLE):
        fig, (ax_loss, ax_f1) = plt.subplots(1, 2, figsize=(8, 3.2))
        ax_loss.plot(epochs, [r.train_loss for r in history], label="train")
        ax_loss.plot(epochs, [r.val_loss for r in history], label="validation")
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("BCE loss")
        ax_loss.legend(frameon=False)
        ax_f1.plot(epochs, [r.train_f1 for r in history], label="train")
        ax_f1.plot(epochs, [r.val_f1 for r in history], label="validation")
        ax_f1.set_xlabel("epoch")
        ax_f1.set_ylabel("F1 (%)")
        ax_f1.set_ylim(0, 100)
        fig.tight_layout()
        fig.savefig(path, metadata=_PNG_META)
        plt.close(fig)
    return Path(path)


def plot_metrics(reports: Mapping[str, Mapping[str, float]], path: str | Path, title: str = "") -> Path:
    """Grouped bars of precision, recall, F1 and accuracy, one group per named report."""
    keys = ("precision", "recall", "f1", "accuracy")
    names = list(reports)
    width = 0.8 / max(1, len(names))
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 3.2))
        for i, name in enumerate(names):
            xs = [k + (i - (len(names) - 1) / 2) * width for k in range(len(keys))]
            ax.bar(xs, [reports[name][k] for k in keys], width=width, label=name)
        ax.set_xticks(range(len(keys)))
        ax.set_xticklabels(["P", "R", "F1", "Acc"])
        ax.set_ylabel("%")
        ax.set_ylim(0, 100)
        if title:
            ax.set_title(title)
        if len(names) > 1:
            ax.legend(frameon=False)
        fig.tight_layout()
        fig.savefig(path, metadata=_PNG_META)
        plt.close(fig)
    return Path(path)


def plot_probabilities(locations: Sequence[str], probs: Sequence[float], threshold: float,
                       path: str | Path, title: str = "") -> Path:
    with plt.rc_context(_STYLE):
        fig, ax = plt.subplots(figsize=(5, 0.5 + 0.35 * max(1, len(locations))))
        colors = ["tab:green" if p >= threshold else "tab:gray" for p in probs]
        ax.barh(range(len(locations)), probs, color=colors)
        ax.set_yticks(range(len(locations)))
        ax.set_yticklabels(locations)
        ax.invert_yaxis()
        ax.axvline(threshold, color="black", lw=0.8, ls="--")
        ax.set_xlim(0, 1)
        ax.set_xlabel("visit probability")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, metadata=_PNG_META)
        plt.close(fig)
    return Path(path)
