"""Matplotlib figures for metric reports, written next to the delimited outputs."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

COLORS = {"birank": "#1f77b4", "pagerank": "#d62728"}
_METADATA = {"Software": None}


def _style(ax):
    ax.spines["top"].set_visible(False)
    ax.spines["right"].set_visible(False)
    ax.tick_params(labelsize=8)


def _save(fig, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=110, metadata=_METADATA)
    plt.close(fig)
    return path


def target_chart_figure(report, path) -> Path:
    bins = report.target_bins
    fig, ax = plt.subplots(figsize=(5, 3.2))
    if bins:
        idx = [b[0] + 1 for b in bins]
        rate = [b[2] for b in bins]
        ax.bar(idx, rate, color=COLORS.get(report.algorithm, "grey"), width=0.8)
        overall = report.n1 / report.n if report.n else 0.0
        ax.axhline(overall, color="black", lw=0.8, ls="--", label="overall rate")
        ax.legend(fontsize=7, frameon=False)
        ax.set_xticks(idx[:: max(1, len(idx) // 10)])
    ax.set_xlabel("bin (highest scores first)", fontsize=9)
    ax.set_ylabel("share with risk = 1", fontsize=9)
    ax.set_title(f"Target chart: {report.algorithm}", fontsize=10)
    _style(ax)
    fig.tight_layout()
    return _save(fig, path)


def rank_boxplot_figure(algorithm: str, rows, path) -> Path:
    """Boxplot of pooled midranks split by label; ``rows`` are ``(id, label, midrank)``."""
    labels = np.array([r[1] for r in rows], dtype=np.int64)
    ranks = np.array([r[2] for r in rows], dtype=np.float64)
    groups = [ranks[labels == 0], ranks[labels == 1]]
    fig, ax = plt.subplots(figsize=(3.6, 3.2))
    if all(g.size for g in groups):
        ax.boxplot(groups, widths=0.5)
        ax.set_xticks([1, 2], ["risk = 0", "risk = 1"])
    ax.set_ylabel("Wilcoxon rank", fontsize=9)
    ax.set_title(algorithm, fontsize=10)
    _style(ax)
    fig.tight_layout()
    return _save(fig, path)


def precision_recall_figure(reports, path) -> Path:
    fig, axes = plt.subplots(1, 2, figsize=(7.5, 3.2), sharex=True)
    for rep in reports:
        if not rep.pr_curve:
            continue
        n_sel = [p[0] for p in rep.pr_curve]
        color = COLORS.get(rep.algorithm, None)
        axes[0].plot(n_sel, [p[1] for p in rep.pr_curve], color=color, label=rep.algorithm, lw=1.2)
        axes[1].plot(n_sel, [p[2] for p in rep.pr_curve], color=color, label=rep.algorithm, lw=1.2)
    axes[0].set_ylabel("precision", fontsize=9)
    axes[1].set_ylabel("recall", fontsize=9)
    for ax in axes:
        ax.set_xscale("log")
        ax.set_xlabel("selected cases", fontsize=9)
        _style(ax)
    axes[1].legend(fontsize=7, frameon=False)
    fig.tight_layout()
    return _save(fig, path)
