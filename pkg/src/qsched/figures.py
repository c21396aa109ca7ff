"""Benchmark report rendering: grouped bars per metric, saved as PNG."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .bench import BenchmarkReport

_METRICS = (
    ("makespan", "Makespan [s]"),
    ("pmax", "Schedule cost"),
    ("noise", "Total noise"),
)
_COLORS = {"baseline": "#888888", "heuristic": "#1f77b4", "rl": "#d62728"}


def _grouped_bars(ax, report: BenchmarkReport, metric: str) -> None:
    schedulers = report.schedulers()
    batches = sorted({r.batch for r in report.rows})
    width = 0.8 / max(len(schedulers), 1)
    for i, scheduler in enumerate(schedulers):
        values = {r.batch: getattr(r, metric) for r in report.rows if r.scheduler == scheduler}
        xs = np.arange(len(batches)) + i * width
        ys = [values.get(b, 0.0) for b in batches]
        ax.bar(xs, ys, width=width, label=scheduler, color=_COLORS.get(scheduler))
    ax.set_xticks(np.arange(len(batches)) + 0.4 - width / 2)
    ax.set_xticklabels([str(b) for b in batches])
    ax.set_xlabel("batch")


def render_report_figures(report: BenchmarkReport, out_dir: str, prefix: str = "bench") -> list[str]:
    """One per-batch figure per metric plus an aggregate summary; lower is better."""
    os.makedirs(out_dir, exist_ok=True)
    paths: list[str] = []
    for metric, label in _METRICS:
        fig, ax = plt.subplots(figsize=(7, 4))
        _grouped_bars(ax, report, metric)
        ax.set_ylabel(label)
        ax.set_title(f"{report.scenario}: {label.lower()} per batch")
        ax.legend()
        fig.tight_layout()
        path = os.path.join(out_dir, f"{prefix}_{metric}.png")
        fig.savefig(path, dpi=150)
        plt.close(fig)
        paths.append(path)

    aggregates = report.aggregates()
    schedulers = report.schedulers()
    fig, axes = plt.subplots(1, len(_METRICS), figsize=(11, 3.5))
    for ax, (metric, label) in zip(axes, _METRICS):
        means = [aggregates.get(s, {}).get(metric, {}).get("mean", 0.0) for s in schedulers]
        ax.bar(
            schedulers,
            means,
            color=[_COLORS.get(s) for s in schedulers],
        )
        ax.set_title(label)
    fig.suptitle(f"{report.scenario}: mean over batches (lower is better)")
    fig.tight_layout()
    path = os.path.join(out_dir, f"{prefix}_summary.png")
    fig.savefig(path, dpi=150)
    plt.close(fig)
    paths.append(path)
    return paths
