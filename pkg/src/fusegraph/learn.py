"""Linear one-vs-rest estimators over sparse vectors, plus the two
classical fusion baselines (feature concatenation and majority voting).

The learner is self-contained: full-batch gradient descent on an
L2-regularized logistic (default) or hinge objective, with a backtracking
step rule that never accepts a loss increase, so training is deterministic
and the recorded per-epoch loss is non-increasing. Model selection is a
grid search over the regularization constant scored by stratified k-fold
cross-validated balanced accuracy; ties go to the smaller constant.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.sparse as sp

from .dataset import FeatureTable
from .embedding import FusionVector
from .errors import (
    AlignmentError,
    ArityError,
    DegenerateLabelsError,
    ShapeError,
    StratificationError,
)
from .metrics import balanced_accuracy


@dataclass
class TrainConfig:
    reg_grid: list[float] = field(default_factory=lambda: [0.001, 0.01, 0.1])
    folds: int = 5
    epochs: int = 200
    learning_rate: float = 1.0
    seed: int = 0
    objective: str = "logistic"

    def __post_init__(self) -> None:
        if not self.reg_grid:
            raise ValueError("reg_grid must be non-empty")
        if any(r <= 0 for r in self.reg_grid):
            raise ValueError("regularization constants must be positive")
        if self.folds < 2:
            raise ValueError(f"folds must be >= 2, got {self.folds}")
        if self.objective not in ("logistic", "hinge"):
            raise ValueError(f"objective must be logistic or hinge, got {self.objective!r}")


@dataclass
class Estimator:
    """Linear model: one weight vector per class, or a single vector for
    binary tasks (positive margin means the second class)."""

    classes: list[str]
    weights: np.ndarray  # (r, dim) with r == len(classes) or r == 1 (binary)
    biases: np.ndarray  # (r,)
    regularization: float
    objective: str
    meta: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1])


def _as_matrix(X: Sequence[FusionVector] | sp.spmatrix | np.ndarray) -> sp.csr_matrix:
    if isinstance(X, np.ndarray):
        return sp.csr_matrix(X)
    if sp.issparse(X):
        return X.tocsr()
    dims = {x.dim for x in X}
    if len(dims) > 1:
        raise ShapeError(f"vectors disagree on dimension: {sorted(dims)}")
    dim = dims.pop() if dims else 0
    data, indices, indptr = [], [], [0]
    for x in X:
        for idx, value in x.entries:
            indices.append(idx)
            data.append(value)
        indptr.append(len(indices))
    return sp.csr_matrix(
        (np.array(data), np.array(indices, dtype=np.int64), np.array(indptr, dtype=np.int64)),
        shape=(len(X), dim),
    )


def stratified_folds(y: Sequence[str], folds: int, seed: int) -> list[np.ndarray]:
    """Validation index arrays for stratified k-fold CV.

    Each class's indices are shuffled (seeded) and dealt round-robin, so any
    class with >= 2 members shows up in at least two folds and therefore in
    every training portion.
    """
    rng = np.random.default_rng(seed)
    by_class: dict[str, list[int]] = {}
    for i, label in enumerate(y):
        by_class.setdefault(label, []).append(i)
    for label, members in by_class.items():
        if len(members) < 2:
            raise StratificationError(
                f"class {label!r} has {len(members)} member(s); need >= 2 for CV"
            )
    buckets: list[list[int]] = [[] for _ in range(folds)]
    for label in sorted(by_class):
        members = np.array(by_class[label])
        members = members[rng.permutation(len(members))]
        for slot, idx in enumerate(members.tolist()):
            buckets[slot % folds].append(idx)
    return [np.array(sorted(b), dtype=np.int64) for b in buckets]


def _objective(kind: str):
    if kind == "logistic":

        def loss_grad(Z: np.ndarray, T: np.ndarray):
            n = Z.shape[0]
            margins = T * Z
            loss = float(np.logaddexp(0.0, -margins).sum() / n)
            dZ = -T / (1.0 + np.exp(margins)) / n
            return loss, dZ

    else:  # hinge

        def loss_grad(Z: np.ndarray, T: np.ndarray):
            n = Z.shape[0]
            gap = 1.0 - T * Z
            active = gap > 0.0
            loss = float(gap[active].sum() / n)
            dZ = np.where(active, -T, 0.0) / n
            return loss, dZ

    return loss_grad


def _fit_linear(
    X: sp.csr_matrix,
    T: np.ndarray,
    reg: float,
    epochs: int,
    learning_rate: float,
    objective: str,
) -> tuple[np.ndarray, np.ndarray, list[float]]:
    """Full-batch descent on the summed per-class objective.

    The step is backtracked (halved) until the loss does not increase; a
    step that cannot improve is rejected outright, which makes the recorded
    loss history non-increasing by construction.
    """
    n, dim = X.shape
    r = T.shape[1]
    W = np.zeros((r, dim))
    b = np.zeros(r)
    XT = X.T.tocsr()
    loss_grad = _objective(objective)

    def total_loss(W_: np.ndarray, b_: np.ndarray) -> float:
        Z = X @ W_.T + b_
        data_loss, _ = loss_grad(Z, T)
        return data_loss + 0.5 * reg * float((W_**2).sum())

    history = [total_loss(W, b)]
    lr = learning_rate
    for _ in range(epochs):
        Z = X @ W.T + b
        _, dZ = loss_grad(Z, T)
        gW = (XT @ dZ).T + reg * W
        gb = dZ.sum(axis=0)
        accepted = False
        trial = lr
        for _ in range(40):
            W2 = W - trial * gW
            b2 = b - trial * gb
            candidate = total_loss(W2, b2)
            if candidate <= history[-1]:
                accepted = True
                break
            trial /= 2.0
        if accepted:
            W, b = W2, b2
            history.append(candidate)
            lr = min(learning_rate, trial * 2.0)
        else:
            history.append(history[-1])
    return W, b, history


def _targets(y: Sequence[str], classes: list[str]) -> np.ndarray:
    """Sign targets, one column per trained vector (k columns, or 1 when
    binary)."""
    if len(classes) == 2:
        return np.where(np.array(y) == classes[1], 1.0, -1.0)[:, None]
    cols = [np.where(np.array(y) == c, 1.0, -1.0) for c in classes]
    return np.stack(cols, axis=1)


def _raw_scores(est: Estimator, x) -> np.ndarray:
    """Per-class decision scores for one vector (sparse or dense)."""
    if isinstance(x, FusionVector):
        if x.dim != est.dim:
            raise ShapeError(f"vector dim {x.dim} != estimator dim {est.dim}")
        dense = x.to_dense()
    else:
        dense = np.asarray(x, dtype=np.float64)
        if dense.size != est.dim:
            raise ShapeError(f"vector dim {dense.size} != estimator dim {est.dim}")
    z = est.weights @ dense + est.biases
    if est.weights.shape[0] == 1 and len(est.classes) == 2:
        return np.array([0.0, float(z[0])])
    return z


def predict_label(est: Estimator, x) -> str:
    """Argmax of the per-class scores; exact ties go to the earliest class."""
    scores = _raw_scores(est, x)
    return est.classes[int(np.argmax(scores))]


def predict_proba(est: Estimator, x):
    """Probability of the second class (binary) or the softmax simplex
    vector (multiclass)."""
    scores = _raw_scores(est, x)
    if len(est.classes) == 2:
        margin = scores[1] - scores[0]
        return float(1.0 / (1.0 + np.exp(-margin)))
    shifted = scores - scores.max()
    expd = np.exp(shifted)
    return expd / expd.sum()


def _cv_score(
    X: sp.csr_matrix,
    y: list[str],
    classes: list[str],
    reg: float,
    cfg: TrainConfig,
    folds: list[np.ndarray],
) -> float:
    scores = []
    all_idx = np.arange(len(y))
    for val_idx in folds:
        if val_idx.size == 0:
            continue
        train_mask = np.ones(len(y), dtype=bool)
        train_mask[val_idx] = False
        train_idx = all_idx[train_mask]
        y_train = [y[i] for i in train_idx.tolist()]
        W, b, _ = _fit_linear(
            X[train_idx], _targets(y_train, classes), reg, cfg.epochs, cfg.learning_rate, cfg.objective
        )
        Z = X[val_idx] @ W.T + b
        if W.shape[0] == 1:
            pred = [classes[1] if z > 0 else classes[0] for z in Z[:, 0].tolist()]
        else:
            pred = [classes[int(i)] for i in np.argmax(Z, axis=1).tolist()]
        y_val = [y[i] for i in val_idx.tolist()]
        scores.append(balanced_accuracy(y_val, pred))
    return float(np.mean(scores))


def train_classifier(
    X: Sequence[FusionVector] | sp.spmatrix | np.ndarray,
    y: Sequence[str],
    cfg: TrainConfig,
) -> Estimator:
    """Grid-search the regularization constant by stratified CV balanced
    accuracy, then refit the winner on all data.

    Deterministic given (X, y, cfg): folds are seeded, optimization is
    full-batch from a zero start, and grid ties resolve to the smaller
    constant.
    """
    y = list(y)
    M = _as_matrix(X)
    if M.shape[0] != len(y):
        raise ShapeError(f"{M.shape[0]} vectors but {len(y)} labels")
    if len(y) < cfg.folds:
        raise ShapeError(f"need at least folds={cfg.folds} samples, got {len(y)}")
    classes = sorted(set(y))
    if len(classes) < 2:
        raise DegenerateLabelsError(f"need >= 2 classes, got {classes}")

    folds = stratified_folds(y, cfg.folds, cfg.seed)
    grid_scores: list[tuple[float, float]] = []
    best_reg, best_score = None, -1.0
    for reg in sorted(cfg.reg_grid):
        score = _cv_score(M, y, classes, reg, cfg, folds)
        grid_scores.append((reg, score))
        if score > best_score:
            best_reg, best_score = reg, score

    W, b, history = _fit_linear(
        M, _targets(y, classes), best_reg, cfg.epochs, cfg.learning_rate, cfg.objective
    )
    return Estimator(
        classes=classes,
        weights=W,
        biases=b,
        regularization=best_reg,
        objective=cfg.objective,
        meta={
            "seed": cfg.seed,
            "folds": cfg.folds,
            "epochs": cfg.epochs,
            "learning_rate": cfg.learning_rate,
            "grid_scores": [[r, s] for r, s in grid_scores],
            "cv_score": best_score,
            "loss_history": history,
        },
    )


def concat_features(tables: list[FeatureTable], train_ids: Iterable[str]) -> FeatureTable:
    """Early-fusion baseline: per-attribute min-max over the train split,
    then horizontal concatenation. Non-train rows reuse the train min/max
    and are clipped to [0, 1]; constant attributes map to 0."""
    if not tables:
        raise AlignmentError("need at least one table to concatenate")
    id_sets = [set(t.rows) for t in tables]
    if any(s != id_sets[0] for s in id_sets[1:]):
        raise AlignmentError("tables do not share the same sample id set")
    train_ids = sorted(set(train_ids))
    missing = [i for i in train_ids if i not in id_sets[0]]
    if missing:
        raise AlignmentError(f"train ids missing from tables: {missing[:5]}")

    all_ids = sorted(id_sets[0])
    blocks = []
    for table in tables:
        train_block = table.matrix(train_ids)
        lo = train_block.min(axis=0)
        hi = train_block.max(axis=0)
        span = hi - lo
        span[span == 0.0] = np.inf  # constant attribute -> everything maps to 0
        block = (table.matrix(all_ids) - lo) / span
        blocks.append(np.clip(block, 0.0, 1.0))
    joined = np.hstack(blocks)
    name = "+".join(t.descriptor_name for t in tables)
    return FeatureTable(
        descriptor_name=name,
        dim=joined.shape[1],
        rows={sid: joined[i] for i, sid in enumerate(all_ids)},
    )


def majority_vote(predictions: list[list[str]]) -> list[str]:
    """Late-fusion baseline: per-sample modal label over an odd number of
    predictors; count ties go to the earliest predictor's label."""
    if len(predictions) % 2 == 0:
        raise ArityError(f"majority vote needs an odd predictor count, got {len(predictions)}")
    lengths = {len(p) for p in predictions}
    if len(lengths) > 1:
        raise ShapeError(f"predictors disagree on sample count: {sorted(lengths)}")
    out = []
    for votes in zip(*predictions):
        counts: dict[str, int] = {}
        for v in votes:
            counts[v] = counts.get(v, 0) + 1
        top = max(counts.values())
        out.append(next(v for v in votes if counts[v] == top))
    return out
