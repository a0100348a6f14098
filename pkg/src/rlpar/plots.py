"""Figures written next to the tab-separated reports."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

DPI = 120


def _finish(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.tight_layout()
    fig.savefig(path, dpi=DPI)
    plt.close(fig)
    return path


def plot_training(report, path):
    """Mean TD loss and train-set mA per epoch, one line per group."""
    fig, (ax_loss, ax_ma) = plt.subplots(1, 2, figsize=(10, 4))
    for g in sorted({r.group for r in report.records}):
        recs = report.for_group(g)
        epochs = [r.epoch for r in recs]
        label = f"{g}: {recs[0].name}"
        ax_loss.plot(epochs, [r.mean_loss for r in recs], marker="o", ms=3, label=label)
        ax_ma.plot(epochs, [r.mA for r in recs], marker="o", ms=3, label=label)
    ax_loss.set_xlabel("epoch")
    ax_loss.set_ylabel("mean TD loss")
    ax_loss.set_yscale("log")
    ax_ma.set_xlabel("epoch")
    ax_ma.set_ylabel("train mA (group columns)")
    ax_ma.set_ylim(0, 1.02)
    ax_ma.legend(fontsize=7)
    return _finish(fig, path)


def plot_rho_sweep(result, path):
    rho = [r.rho for r in result.rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    for key, label in (("acc", "Acc"), ("f1", "F1"), ("mA", "mA")):
        ax.plot(rho, [getattr(r.metrics, key) for r in result.rows], marker="o", ms=3, label=label)
    ax.set_xlabel(r"$\rho$")
    ax.set_ylabel("test metric")
    ax.set_title(f"group {result.group_name}")
    ax.legend()
    return _finish(fig, path)


def plot_attribute_accuracy(report, names, path):
    """Per-attribute positive and negative accuracy bars."""
    n = len(names)
    x = np.arange(n)
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * n), 4))
    ax.bar(x - 0.2, report.pos_acc, width=0.4, label="TP/P")
    ax.bar(x + 0.2, report.neg_acc, width=0.4, label="TN/N")
    ax.set_xticks(x)
    ax.set_xticklabels(names, rotation=70, fontsize=7)
    ax.set_ylim(0, 1.05)
    ax.set_title(f"mA {report.mA:.4f}  Acc {report.acc:.4f}  F1 {report.f1:.4f}")
    ax.legend(fontsize=8)
    return _finish(fig, path)


def plot_ablation(result, path):
    keys = ("mA", "acc", "prec", "rec", "f1")
    labels = ("mA", "Acc", "Prec", "Rec", "F1")
    names = list(result.variants)
    x = np.arange(len(keys))
    width = 0.8 / max(len(names), 1)
    fig, ax = plt.subplots(figsize=(7, 4))
    for k, name in enumerate(names):
        m = result.variants[name]
        ax.bar(x + (k - (len(names) - 1) / 2) * width, [getattr(m, key) for key in keys], width=width, label=name)
    ax.set_xticks(x)
    ax.set_xticklabels(labels)
    ax.set_ylim(0, 1.05)
    ax.legend(fontsize=8)
    return _finish(fig, path)
