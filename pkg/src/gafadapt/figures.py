"""Matplotlib rendering of evaluation reports and training logs to files.

Kept separate from the CSV writers so the delimited outputs stay
byte-reproducible and headless environments only pay the matplotlib
import when figures are requested.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .evaluation import EvalReport
from .rl import EpisodeStats


def _plt():
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    return plt


def render_eval_figures(report: EvalReport, outdir, prefix: str = "eval_") -> list[Path]:
    """Render RMSE/ANEES series, the trade-off scatter and action usage.

    Returns the list of written files.
    """
    plt = _plt()
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    steps = np.arange(1, report.horizon + 1)

    fig, ax = plt.subplots(figsize=(7, 4))
    for name, res in report.results.items():
        ax.plot(steps, res.rmse, label=name, linewidth=1.2)
    ax.set_xlabel("time step k")
    ax.set_ylabel("RMSE")
    ax.set_title(f"RMSE over time ({report.model_name}, {report.filter_kind})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = outdir / f"{prefix}rmse.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(7, 4))
    for name, res in report.results.items():
        ax.plot(steps, res.anees, label=name, linewidth=1.2)
    ax.axhline(report.n_x, color="k", linestyle="--", linewidth=0.8, label=f"n_x = {report.n_x}")
    ax.set_xlabel("time step k")
    ax.set_ylabel("ANEES")
    ax.set_title(f"ANEES over time ({report.model_name}, {report.filter_kind})")
    ax.legend(fontsize=8)
    fig.tight_layout()
    path = outdir / f"{prefix}anees.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)

    fig, ax = plt.subplots(figsize=(5.5, 4.5))
    for name, res in report.results.items():
        ax.scatter(res.time_avg_rmse, res.time_avg_anees, s=36)
        ax.annotate(name, (res.time_avg_rmse, res.time_avg_anees), fontsize=8,
                    xytext=(4, 4), textcoords="offset points")
    ax.axhline(report.n_x, color="k", linestyle="--", linewidth=0.8)
    ax.set_xlabel("time-averaged RMSE")
    ax.set_ylabel("time-averaged ANEES")
    ax.set_title("Accuracy vs consistency trade-off")
    fig.tight_layout()
    path = outdir / f"{prefix}tradeoff.png"
    fig.savefig(path, dpi=130)
    plt.close(fig)
    written.append(path)

    varying = [(n, r) for n, r in report.results.items() if r.param_hist is not None]
    if varying:
        fig, axes = plt.subplots(len(varying), 1, figsize=(7, 2.6 * len(varying)),
                                 squeeze=False, sharex=True)
        for ax, (name, res) in zip(axes[:, 0], varying):
            fractions = res.param_hist / np.maximum(res.param_hist.sum(axis=1, keepdims=True), 1)
            ax.stackplot(steps, fractions.T, labels=res.action_labels)
            ax.set_ylabel("action share")
            ax.set_title(name, fontsize=9)
            ax.set_ylim(0, 1)
            ax.legend(fontsize=7, ncol=3, loc="upper right")
        axes[-1, 0].set_xlabel("time step k")
        fig.tight_layout()
        path = outdir / f"{prefix}actions.png"
        fig.savefig(path, dpi=130)
        plt.close(fig)
        written.append(path)

    return written


def render_training_figure(log: list[EpisodeStats], path) -> Path:
    """Per-episode cumulative cost and mean entropy curves."""
    plt = _plt()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    episodes = [rec.episode for rec in log]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7, 5), sharex=True)
    ax1.plot(episodes, [rec.cumulative_cost for rec in log], linewidth=1.0)
    ax1.set_ylabel("episode cost")
    ax2.plot(episodes, [rec.mean_entropy for rec in log], linewidth=1.0, color="tab:orange")
    ax2.set_ylabel("mean policy entropy")
    ax2.set_xlabel("episode")
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path
