"""Figure rendering for evaluation reports.

Every figure is a PNG written next to the delimited output it illustrates:
one bar chart per metric histogram plus a summary chart of win/validity
rates, and a grouped comparison chart when several models are reported
together. matplotlib is imported lazily with the Agg backend so library
users who never render figures pay no import cost, and PNG metadata that
varies between runs (timestamps, tool versions) is stripped so reruns
produce identical bytes.
"""

from __future__ import annotations

import os
from collections.abc import Mapping, Sequence

from .evaluation import Histogram, MetricReport

__all__ = [
    "render_histogram_png",
    "render_report_figures",
    "render_comparison_png",
]

_PNG_METADATA = {"Software": None}  # drop the varying "matplotlib version x.y" chunk


def _pyplot():
    import matplotlib

    matplotlib.use("Agg", force=True)
    import matplotlib.pyplot as plt

    return plt


def render_histogram_png(path, histogram: Histogram, title: str, xlabel: str) -> None:
    """Draw one histogram as a bar chart; overflow mass is noted in the title."""
    plt = _pyplot()
    edges = histogram.edges()
    centers = [(edges[i] + edges[i + 1]) / 2 for i in range(histogram.nbins)]
    width = (histogram.hi - histogram.lo) / histogram.nbins
    fig, ax = plt.subplots(figsize=(6.4, 3.6))
    try:
        ax.bar(centers, histogram.counts, width=width * 0.95, color="#4878a8")
        spill = histogram.underflow + histogram.overflow
        suffix = f" ({spill} outside range)" if spill else ""
        ax.set_title(title + suffix)
        ax.set_xlabel(xlabel)
        ax.set_ylabel("count")
        fig.tight_layout()
        fig.savefig(path, metadata=_PNG_METADATA)
    finally:
        plt.close(fig)


def _render_rates_png(path, report: MetricReport) -> None:
    plt = _pyplot()
    labels = ["win_rate"] + sorted(report.rates)
    values = [report.win_rate] + [report.rates[k] for k in sorted(report.rates)]
    fig, ax = plt.subplots(figsize=(4.8, 3.6))
    try:
        ax.bar(range(len(labels)), values, color="#70ad70")
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=20, ha="right")
        ax.set_ylim(0.0, 1.0)
        ax.set_title(f"{report.direction}: rates over {report.count} pairs")
        fig.tight_layout()
        fig.savefig(path, metadata=_PNG_METADATA)
    finally:
        plt.close(fig)


def render_report_figures(outdir, report: MetricReport, prefix: str = "fig") -> list[str]:
    """Render one PNG per metric histogram plus a rates summary.

    Returns the paths written, in deterministic (sorted) order.
    """
    written = []
    for name in sorted(report.metrics):
        path = os.path.join(outdir, f"{prefix}_{name}.png")
        render_histogram_png(
            path, report.metrics[name].histogram,
            title=f"{report.direction}: {name}", xlabel=name,
        )
        written.append(path)
    rates_path = os.path.join(outdir, f"{prefix}_rates.png")
    _render_rates_png(rates_path, report)
    written.append(rates_path)
    return written


def render_comparison_png(
    path,
    model_names: Sequence[str],
    series: Mapping[str, Sequence[float]],
    title: str,
    ylabel: str = "rate",
) -> None:
    """Grouped bar chart: one group per model, one bar per series entry."""
    plt = _pyplot()
    names = list(model_names)
    keys = sorted(series)
    n_groups, n_bars = len(names), len(keys)
    bar_width = 0.8 / max(n_bars, 1)
    fig, ax = plt.subplots(figsize=(1.6 + 1.4 * n_groups, 3.8))
    try:
        for j, key in enumerate(keys):
            values = list(series[key])
            if len(values) != n_groups:
                raise ValueError(f"series {key!r} has {len(values)} values "
                                 f"for {n_groups} models")
            xs = [i + (j - (n_bars - 1) / 2) * bar_width for i in range(n_groups)]
            ax.bar(xs, values, width=bar_width * 0.95, label=key)
        ax.set_xticks(range(n_groups))
        ax.set_xticklabels(names, rotation=15, ha="right")
        ax.set_ylabel(ylabel)
        ax.set_title(title)
        ax.legend(fontsize="small")
        fig.tight_layout()
        fig.savefig(path, metadata=_PNG_METADATA)
    finally:
        plt.close(fig)
