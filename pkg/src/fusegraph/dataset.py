"""Feature and label ingestion plus stratified train/test splitting.

File formats (documented contract):

* features: one sample per line, ``id,v1,...,vd``, UTF-8, ``.`` decimal
  separator, no header. Every row must have the same arity.
* labels: one sample per line, ``id,label``.

All loaded tables are immutable in spirit: nothing in the pipeline mutates
them after construction, so they are safe to share across workers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DuplicateIdError, ParseError, StratificationError


@dataclass
class FeatureTable:
    """Dense per-descriptor feature matrix keyed by sample id."""

    descriptor_name: str
    dim: int
    rows: dict[str, np.ndarray]

    def ids(self) -> list[str]:
        return list(self.rows)

    def matrix(self, ids: list[str]) -> np.ndarray:
        """Stack the rows for ``ids`` (in that order) into an array."""
        return np.stack([self.rows[i] for i in ids])

    def __contains__(self, sample_id: str) -> bool:
        return sample_id in self.rows


@dataclass
class LabelTable:
    """Sample id to label mapping; ``classes`` keeps first-appearance order."""

    rows: dict[str, str]
    classes: list[str] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.classes:
            seen: dict[str, None] = {}
            for label in self.rows.values():
                seen.setdefault(label, None)
            self.classes = list(seen)

    def members(self, label: str) -> list[str]:
        return [s for s, lab in self.rows.items() if lab == label]


@dataclass
class SplitSpec:
    """Disjoint train/test id sets produced by :func:`stratified_split`."""

    train: set[str]
    test: set[str]
    seed: int

    def __post_init__(self) -> None:
        overlap = self.train & self.test
        if overlap:
            raise ValueError(f"train/test overlap: {sorted(overlap)[:5]}")


def _split_line(line: str) -> list[str]:
    return [part.strip() for part in line.split(",")]


def load_features(path: str | Path, descriptor_name: str) -> FeatureTable:
    """Load a ``id,v1,...,vd`` text table into a :class:`FeatureTable`.

    Raises :class:`ParseError` naming the offending line on malformed rows
    (wrong arity, non-numeric, non-finite values) and
    :class:`DuplicateIdError` on repeated ids.
    """
    path = Path(path)
    rows: dict[str, np.ndarray] = {}
    dim: int | None = None
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = _split_line(line)
            if len(parts) < 2:
                raise ParseError(f"{path}:{lineno}: expected 'id,v1,...', got {line!r}")
            sample_id = parts[0]
            if not sample_id:
                raise ParseError(f"{path}:{lineno}: empty sample id")
            if sample_id in rows:
                raise DuplicateIdError(f"{path}:{lineno}: duplicate id {sample_id!r}")
            try:
                values = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError as exc:
                raise ParseError(f"{path}:{lineno}: non-numeric value ({exc})") from None
            if not np.all(np.isfinite(values)):
                raise ParseError(f"{path}:{lineno}: non-finite value")
            if dim is None:
                dim = values.size
            elif values.size != dim:
                raise ParseError(
                    f"{path}:{lineno}: expected {dim} values, got {values.size}"
                )
            rows[sample_id] = values
    if dim is None:
        raise ParseError(f"{path}: no feature rows")
    return FeatureTable(descriptor_name=descriptor_name, dim=dim, rows=rows)


def load_labels(path: str | Path) -> LabelTable:
    """Load a ``id,label`` text table into a :class:`LabelTable`."""
    path = Path(path)
    rows: dict[str, str] = {}
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = _split_line(line)
            if len(parts) != 2 or not parts[0] or not parts[1]:
                raise ParseError(f"{path}:{lineno}: expected 'id,label', got {line!r}")
            if parts[0] in rows:
                raise DuplicateIdError(f"{path}:{lineno}: duplicate id {parts[0]!r}")
            rows[parts[0]] = parts[1]
    if not rows:
        raise ParseError(f"{path}: no label rows")
    return LabelTable(rows=rows)


def save_features(table: FeatureTable, path: str | Path) -> Path:
    """Write a feature table in the ``id,v1,...,vd`` format it loads from."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for sample_id, row in table.rows.items():
            fh.write(sample_id + "," + ",".join(repr(float(v)) for v in row) + "\n")
    return path


def save_labels(labels: LabelTable, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for sample_id, label in labels.rows.items():
            fh.write(f"{sample_id},{label}\n")
    return path


def stratified_split(labels: LabelTable, train_fraction: float, seed: int) -> SplitSpec:
    """Split labeled ids into train/test keeping per-class proportions.

    Per-class train counts follow the largest-remainder rule: each class gets
    ``floor(train_fraction * size)`` seats, and the leftover seats (so the
    train total equals ``round(train_fraction * n)``) go to the classes with
    the largest fractional remainders, ties broken by class order in
    ``labels.classes``. Member selection within a class is a seeded shuffle,
    so the split is a pure function of (labels, train_fraction, seed).
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError(f"train_fraction must be in (0,1), got {train_fraction}")
    sizes = {c: len(labels.members(c)) for c in labels.classes}
    for c, size in sizes.items():
        if size < 2:
            raise StratificationError(f"class {c!r} has {size} member(s); need >= 2")

    total = sum(sizes.values())
    target_train = int(round(train_fraction * total))
    quotas = {c: train_fraction * sizes[c] for c in labels.classes}
    counts = {c: math.floor(quotas[c]) for c in labels.classes}
    leftovers = target_train - sum(counts.values())
    # Largest remainder first; ties resolved by position in labels.classes.
    order = sorted(
        labels.classes,
        key=lambda c: (-(quotas[c] - counts[c]), labels.classes.index(c)),
    )
    for c in order[:leftovers]:
        counts[c] += 1

    rng = np.random.default_rng(seed)
    train: set[str] = set()
    test: set[str] = set()
    for c in labels.classes:
        members = sorted(labels.members(c))
        perm = rng.permutation(len(members))
        chosen = {members[i] for i in perm[: counts[c]]}
        train |= chosen
        test |= set(members) - chosen
    return SplitSpec(train=train, test=test, seed=seed)
