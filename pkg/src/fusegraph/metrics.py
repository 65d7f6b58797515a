"""Evaluation metrics and report emission.

Balanced accuracy is the unweighted mean of per-class recall. AP@K scores a
single ranked relevance list at a cutoff, normalized by min(K, R) where R
counts all relevant items in the full list; mAP averages AP@K over a cutoff
set. Reports are written both as a structured text file and as a flat
``metric,value`` table.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .errors import CutoffError, DomainError, ShapeError


def per_class_recall(y_true: Sequence[str], y_pred: Sequence[str]) -> dict[str, float]:
    """Recall per class, keyed by class, classes in first-appearance order."""
    if len(y_true) != len(y_pred):
        raise ShapeError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if not y_true:
        raise DomainError("cannot score an empty label list")
    totals: dict[str, int] = {}
    hits: dict[str, int] = {}
    for t, p in zip(y_true, y_pred):
        totals[t] = totals.get(t, 0) + 1
        if t == p:
            hits[t] = hits.get(t, 0) + 1
    return {c: hits.get(c, 0) / totals[c] for c in totals}


def balanced_accuracy(y_true: Sequence[str], y_pred: Sequence[str]) -> float:
    """Unweighted mean of per-class recall over the classes present in
    ``y_true``."""
    recalls = per_class_recall(y_true, y_pred)
    return sum(recalls.values()) / len(recalls)


def average_precision_at_k(ranked_relevance: Sequence[bool], k: int) -> float:
    """AP@K over one ranked boolean relevance list.

    Sums precision@i at each relevant position i <= k and divides by
    min(k, R), with R the number of relevant items in the whole list;
    a list with no relevant item scores 0.
    """
    n = len(ranked_relevance)
    if k < 1:
        raise CutoffError(f"cutoff must be >= 1, got {k}")
    if k > n:
        raise CutoffError(f"cutoff {k} exceeds list length {n}")
    total_relevant = sum(bool(r) for r in ranked_relevance)
    if total_relevant == 0:
        return 0.0
    hits = 0
    acc = 0.0
    for i, rel in enumerate(ranked_relevance[:k], start=1):
        if rel:
            hits += 1
            acc += hits / i
    return acc / min(k, total_relevant)


def mean_ap(ranked_relevance: Sequence[bool], cutoffs: Sequence[int]) -> float:
    """Arithmetic mean of AP@K over the cutoff set."""
    if not cutoffs:
        raise CutoffError("need at least one cutoff")
    return sum(average_precision_at_k(ranked_relevance, k) for k in cutoffs) / len(cutoffs)


@dataclass
class MetricReport:
    """Named metric values plus per-class recalls and the cutoffs used."""

    values: dict[str, float] = field(default_factory=dict)
    class_recalls: dict[str, float] = field(default_factory=dict)
    cutoffs: list[int] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        for name, value in self.values.items():
            if not 0.0 <= value <= 1.0:
                raise DomainError(f"metric {name!r} outside [0,1]: {value}")


def write_report(report: MetricReport, out_dir: str | Path, basename: str) -> dict[str, Path]:
    """Write ``<basename>_report.txt`` and ``<basename>_metrics.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    txt = out_dir / f"{basename}_report.txt"
    csv = out_dir / f"{basename}_metrics.csv"

    lines = [f"report: {basename}", ""]
    if report.values:
        lines.append("metrics:")
        lines += [f"  {name} = {value:.6f}" for name, value in report.values.items()]
    if report.class_recalls:
        lines.append("per-class recall:")
        lines += [f"  {c} = {r:.6f}" for c, r in sorted(report.class_recalls.items())]
    if report.cutoffs:
        lines.append(f"cutoffs: {', '.join(str(k) for k in report.cutoffs)}")
    for note in report.notes:
        lines.append(f"note: {note}")
    txt.write_text("\n".join(lines) + "\n", encoding="utf-8")

    rows = ["metric,value"]
    rows += [f"{name},{value!r}" for name, value in report.values.items()]
    rows += [f"recall[{c}],{r!r}" for c, r in sorted(report.class_recalls.items())]
    csv.write_text("\n".join(rows) + "\n", encoding="utf-8")
    return {"report": txt, "metrics": csv}
