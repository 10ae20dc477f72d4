"""Matplotlib renderings of the standard reports.

Every report-producing CLI path writes one of these PNGs next to its CSV
output. All functions take a path and return it, using the Agg backend so
they work headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .evalharness import METRICS, GroupedRetrainReport, TrialStats

_MODE_COLORS = {"func": "#d62728", "spac": "#1f77b4", "both": "#2ca02c"}


def plot_consistency(stats_by_mode: dict[str, TrialStats], path, title: str = ""):
    """Grouped bar chart of mean A0/A1/A2 per mode with std error bars."""
    modes = list(stats_by_mode)
    width = 0.8 / len(modes)
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = np.arange(len(METRICS))
    for i, mode in enumerate(modes):
        stats = stats_by_mode[mode]
        means = [stats.mean(m) for m in METRICS]
        stds = [np.sqrt(stats.variance(m)) for m in METRICS]
        ax.bar(
            xs + (i - (len(modes) - 1) / 2) * width, means, width,
            yerr=stds, capsize=3, label=mode,
            color=_MODE_COLORS.get(mode, None),
        )
    ax.set_xticks(xs)
    ax.set_xticklabels([m.upper() for m in METRICS])
    ax.set_ylabel("consistency [%]")
    ax.set_ylim(0, 105)
    ax.legend()
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_nz_sweep(table: dict[int, dict[str, TrialStats]], path, mode: str | None = None):
    """Consistency vs latent size, one line per metric."""
    nzs = sorted(table)
    if mode is None:
        mode = next(iter(table[nzs[0]]))
    fig, ax = plt.subplots(figsize=(6, 4))
    for metric in METRICS:
        means = [table[nz][mode].mean(metric) for nz in nzs]
        stds = [np.sqrt(table[nz][mode].variance(metric)) for nz in nzs]
        ax.errorbar(nzs, means, yerr=stds, marker="o", capsize=3, label=metric.upper())
    ax.set_xlabel("latent size")
    ax.set_ylabel("consistency [%]")
    ax.set_ylim(0, 105)
    ax.set_title(f"mode: {mode}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_loss_curves(report: GroupedRetrainReport, path):
    """Train/test loss transitions before and after grouping, log scale."""
    grouped_train, grouped_test = report.grouped_curves()
    epochs = np.arange(len(report.full_report.train_loss))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, report.full_report.train_loss, "--", color="#d62728", label="full train")
    ax.plot(epochs, report.full_report.test_loss, "-", color="#d62728", label="full test")
    ax.plot(epochs, grouped_train, "--", color="#2ca02c", label="grouped train")
    ax.plot(epochs, grouped_test, "-", color="#2ca02c", label="grouped test")
    ax.set_xlabel("epoch")
    ax.set_ylabel("reconstruction MSE")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_train_report(report, path):
    """Train/test loss transition for a single training run."""
    epochs = np.arange(len(report.train_loss))
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, report.train_loss, "--", label="train")
    ax.plot(epochs, report.test_loss, "-", label="test")
    ax.axvline(report.best_epoch, color="gray", lw=0.8, ls=":", label="best epoch")
    ax.set_xlabel("epoch")
    ax.set_ylabel("reconstruction MSE")
    ax.set_yscale("log")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
