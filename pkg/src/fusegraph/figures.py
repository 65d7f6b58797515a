"""Figure rendering for reports.

Every report path that writes a metrics table also renders PNG figures next
to it: per-class recall bars, an AP@K curve when cutoffs were evaluated, a
method-comparison bar chart for baseline runs, and the metric-vs-L curve
for cut-off sweeps. Uses the Agg backend; nothing here opens a window.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .metrics import MetricReport


def render_report_figures(
    report: MetricReport, out_dir: str | Path, basename: str
) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []

    if report.class_recalls:
        fig, ax = plt.subplots(figsize=(6, 4))
        classes = sorted(report.class_recalls)
        recalls = [report.class_recalls[c] for c in classes]
        ax.bar(range(len(classes)), recalls, color="#4878cf")
        if "balanced_accuracy" in report.values:
            ax.axhline(
                report.values["balanced_accuracy"],
                color="#d65f5f",
                linestyle="--",
                label=f"balanced accuracy = {report.values['balanced_accuracy']:.3f}",
            )
            ax.legend(loc="lower right")
        ax.set_xticks(range(len(classes)))
        ax.set_xticklabels(classes, rotation=45, ha="right")
        ax.set_ylim(0, 1.05)
        ax.set_ylabel("recall")
        ax.set_title(f"{basename}: per-class recall")
        fig.tight_layout()
        path = out_dir / f"{basename}_recalls.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    ap_points = sorted(
        (int(name.split("@", 1)[1]), value)
        for name, value in report.values.items()
        if name.startswith("ap@")
    )
    if ap_points:
        fig, ax = plt.subplots(figsize=(6, 4))
        ks = [k for k, _ in ap_points]
        aps = [v for _, v in ap_points]
        ax.plot(ks, aps, marker="o", color="#4878cf")
        if "map" in report.values:
            ax.axhline(
                report.values["map"],
                color="#d65f5f",
                linestyle="--",
                label=f"mAP = {report.values['map']:.3f}",
            )
            ax.legend(loc="lower right")
        ax.set_xlabel("cutoff K")
        ax.set_ylabel("AP@K")
        ax.set_ylim(0, 1.05)
        ax.set_title(f"{basename}: average precision by cutoff")
        fig.tight_layout()
        path = out_dir / f"{basename}_ap_curve.png"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        written.append(path)

    return written


def render_method_comparison(
    scores: dict[str, float], metric_name: str, out_dir: str | Path, basename: str
) -> Path:
    """Bar chart comparing one metric across methods (fusion vs baselines)."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    names = list(scores)
    values = [scores[n] for n in names]
    ax.bar(range(len(names)), values, color="#6acc65")
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right")
    ax.set_ylim(0, 1.05)
    ax.set_ylabel(metric_name)
    ax.set_title(f"{basename}: {metric_name} by method")
    fig.tight_layout()
    path = out_dir / f"{basename}_methods.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def render_sweep_figure(
    rows: list[dict], metric_name: str, out_dir: str | Path, basename: str = "sweep_l"
) -> Path:
    """Metric-vs-L curve for a cut-off sweep; ``rows`` need L and the metric."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fig, ax = plt.subplots(figsize=(6, 4))
    ls = [row["L"] for row in rows]
    values = [row[metric_name] for row in rows]
    ax.plot(ls, values, marker="o", color="#4878cf")
    ax.set_xlabel("rank cut-off L")
    ax.set_ylabel(metric_name)
    ax.set_ylim(0, 1.05)
    ax.set_title(f"{metric_name} as the rank cut-off grows")
    fig.tight_layout()
    path = out_dir / f"{basename}.png"
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
