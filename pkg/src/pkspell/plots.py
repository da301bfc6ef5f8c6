"""Report figures written next to the tab-delimited CLI output."""

from __future__ import annotations

import math

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "axes.titlesize": 10,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "axes.spines.top": False,
    "axes.spines.right": False,
    "savefig.dpi": 150,
    "savefig.bbox": "tight",
}


def figsize(scale=1.0, ratio=None):
    width = 6.0 * scale
    ratio = (math.sqrt(5.0) - 1.0) / 2.0 if ratio is None else ratio
    return width, width * ratio


def save(fig, path):
    fig.savefig(path)
    plt.close(fig)
    return path


def error_rates(report, path):
    """Per-group spelling error rate, error counts printed on the bars."""
    rows = [r for r in report.rows()]
    names = [r[0] for r in rows]
    rates = [100.0 * r[4] for r in rows]
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(max(1.0, len(rows) / 8)))
        bars = ax.bar(names, rates, color=["0.6"] * (len(rows) - 1) + ["0.2"])
        for bar, row in zip(bars, rows):
            ax.annotate(f"({row[3]})", (bar.get_x() + bar.get_width() / 2, bar.get_height()),
                        ha="center", va="bottom", fontsize=7)
        ax.set_ylabel("spelling error rate (%)")
        ax.tick_params(axis="x", rotation=45)
        return save(fig, path)


def learning_curves(history, path):
    epochs = [h["epoch"] for h in history]
    with plt.rc_context(STYLE):
        fig, (ax_loss, ax_acc) = plt.subplots(1, 2, figsize=figsize(1.4, 0.4))
        ax_loss.plot(epochs, [h["train_loss"] for h in history], color="k")
        ax_loss.set_xlabel("epoch")
        ax_loss.set_ylabel("training loss")
        for key, style, label in (
            ("train_tpc_acc", "-", "train spelling"),
            ("train_ks_acc", "--", "train key sig."),
            ("val_tpc_acc", "-", "val. spelling"),
            ("val_ks_acc", "--", "val. key sig."),
        ):
            ys = [h[key] for h in history]
            if all(y is None for y in ys):
                continue
            color = "C0" if key.startswith("train") else "C3"
            ax_acc.plot(epochs, ys, style, color=color, label=label)
        ax_acc.set_xlabel("epoch")
        ax_acc.set_ylabel("accuracy")
        ax_acc.legend(frameon=False)
        return save(fig, path)


def duration_clusters(durations, clustering, path, title=None):
    """Each duration as a tick, centroids as dotted lines."""
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=figsize(1.0, 0.3))
        colors = [f"C{c % 10}" for c in clustering.assignment]
        ax.vlines(durations, 0, 1, colors=colors, linewidth=0.6)
        for c in clustering.centroids:
            ax.axvline(c, color="0.5", linestyle=":", linewidth=1.0)
        ax.set_yticks([])
        ax.set_xlabel("duration (s)")
        if title:
            ax.set_title(title)
        return save(fig, path)
