"""Comparators and rank generation.

A ranker pairs a descriptor (a feature table) with a dissimilarity
comparator. For a query vector it produces a cut-off rank: the L least
dissimilar response samples in ascending score order, ties broken by
ascending sample id so the order is total and reproducible.

All four comparators are dissimilarities. Similarity-native measures enter
as ``1 - sim`` (cosine); per-rank min-max normalization then converts raw
scores into similarities in [0, 1].
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, NamedTuple

import numpy as np

from .dataset import FeatureTable
from .errors import (
    DegenerateInputError,
    DomainError,
    IncompleteModalityError,
    IncompleteStoreError,
    ShapeError,
)

COMPARATOR_KINDS = ("euclidean", "cosine_dissimilarity", "weighted_jaccard", "pearson_distance")


def weighted_jaccard_distance(u, v) -> float:
    """Weighted Jaccard (Ruzicka) distance: ``1 - sum(min)/sum(max)``.

    Defined for non-negative vectors; two all-zero vectors are identical
    emptiness and get distance 0.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.shape} vs {v.shape}")
    if np.any(u < 0) or np.any(v < 0):
        raise DomainError("weighted_jaccard requires non-negative components")
    denom = np.maximum(u, v).sum()
    if denom == 0.0:
        return 0.0
    return float(1.0 - np.minimum(u, v).sum() / denom)


def pearson_distance(u, v) -> float:
    """Pearson correlation distance ``1 - rho(u, v)``, in [0, 2]."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.shape} vs {v.shape}")
    if u.size < 2:
        raise DomainError("pearson_distance needs vectors of length >= 2")
    uc = u - u.mean()
    vc = v - v.mean()
    nu = np.linalg.norm(uc)
    nv = np.linalg.norm(vc)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInputError("constant vector has undefined correlation")
    rho = float(np.dot(uc, vc) / (nu * nv))
    return 1.0 - max(-1.0, min(1.0, rho))


def euclidean_distance(u, v) -> float:
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.shape} vs {v.shape}")
    return float(np.linalg.norm(u - v))


def cosine_dissimilarity(u, v) -> float:
    """``1 - cos(u, v)``, in [0, 2]; zero vectors are degenerate."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ShapeError(f"length mismatch: {u.shape} vs {v.shape}")
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise DegenerateInputError("zero vector has undefined cosine")
    cos = float(np.dot(u, v) / (nu * nv))
    return 1.0 - max(-1.0, min(1.0, cos))


@dataclass(frozen=True)
class Comparator:
    """A named dissimilarity with scalar and batched evaluation paths."""

    kind: str

    def __post_init__(self) -> None:
        if self.kind not in COMPARATOR_KINDS:
            raise DomainError(f"unknown comparator {self.kind!r}; valid: {COMPARATOR_KINDS}")

    def score(self, u, v) -> float:
        return _SCALAR[self.kind](u, v)

    def scores(self, query_vec: np.ndarray, matrix: np.ndarray) -> np.ndarray:
        """Dissimilarities between ``query_vec`` and every row of ``matrix``.

        Raises the same domain errors as the scalar path; a bad response row
        is reported by its row index wrapped in ``DomainError`` so callers
        can translate indexes into sample ids.
        """
        return _BATCH[self.kind](np.asarray(query_vec, dtype=np.float64), matrix)


class _RowDomainError(DomainError):
    """Domain error attributable to one response row of a batch."""

    def __init__(self, message: str, row: int):
        super().__init__(message)
        self.row = row


def _batch_euclidean(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    diff = m - q[None, :]
    return np.sqrt(np.einsum("ij,ij->i", diff, diff))


def _batch_cosine(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    nq = np.linalg.norm(q)
    if nq == 0.0:
        raise DegenerateInputError("zero query vector has undefined cosine")
    norms = np.linalg.norm(m, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise _RowDomainError("zero vector has undefined cosine", int(bad[0]))
    cos = np.clip((m @ q) / (norms * nq), -1.0, 1.0)
    return 1.0 - cos


def _batch_jaccard(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    if np.any(q < 0):
        raise DomainError("weighted_jaccard requires non-negative components")
    bad = np.flatnonzero(np.any(m < 0, axis=1))
    if bad.size:
        raise _RowDomainError("weighted_jaccard requires non-negative components", int(bad[0]))
    mins = np.minimum(m, q[None, :]).sum(axis=1)
    maxs = np.maximum(m, q[None, :]).sum(axis=1)
    out = np.ones_like(maxs)
    nonzero = maxs > 0.0
    out[nonzero] = 1.0 - mins[nonzero] / maxs[nonzero]
    out[~nonzero] = 0.0  # both all-zero: identical emptiness
    return out


def _batch_pearson(q: np.ndarray, m: np.ndarray) -> np.ndarray:
    if q.size < 2:
        raise DomainError("pearson_distance needs vectors of length >= 2")
    qc = q - q.mean()
    nq = np.linalg.norm(qc)
    if nq == 0.0:
        raise DegenerateInputError("constant query vector has undefined correlation")
    mc = m - m.mean(axis=1, keepdims=True)
    norms = np.linalg.norm(mc, axis=1)
    bad = np.flatnonzero(norms == 0.0)
    if bad.size:
        raise _RowDomainError("constant vector has undefined correlation", int(bad[0]))
    rho = np.clip((mc @ qc) / (norms * nq), -1.0, 1.0)
    return 1.0 - rho


_SCALAR = {
    "euclidean": euclidean_distance,
    "cosine_dissimilarity": cosine_dissimilarity,
    "weighted_jaccard": weighted_jaccard_distance,
    "pearson_distance": pearson_distance,
}
_BATCH = {
    "euclidean": _batch_euclidean,
    "cosine_dissimilarity": _batch_cosine,
    "weighted_jaccard": _batch_jaccard,
    "pearson_distance": _batch_pearson,
}


@dataclass(frozen=True)
class Ranker:
    """(descriptor, comparator) pair; the descriptor name must resolve to a
    feature table at pipeline-build time."""

    descriptor_name: str
    comparator: Comparator


class RankEntry(NamedTuple):
    response: str
    raw_score: float
    similarity: float | None
    position: int


@dataclass
class Rank:
    """Ordered response list for one query under one ranker.

    Entries are sorted by non-decreasing raw dissimilarity (ties by ascending
    response id) with 1-based positions. ``similarity`` is None until
    :func:`normalize_rank` fills it.
    """

    query: str
    ranker_index: int
    entries: list[RankEntry] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.entries)

    def response_ids(self) -> list[str]:
        return [e.response for e in self.entries]


def compute_rank(
    query_vec,
    responses: FeatureTable,
    comparator: Comparator,
    L: int,
    exclude: str | None = None,
    *,
    query_id: str = "",
    ranker_index: int = 0,
    response_ids: Iterable[str] | None = None,
) -> Rank:
    """Top-L responses by ascending dissimilarity (raw scores only).

    ``response_ids`` restricts (and fixes the candidate set of) the scan;
    default is every row of ``responses``. ``exclude`` removes one id (the
    query itself, for self-exclusion). Ties in score break by ascending
    sample id, making the result independent of iteration order.
    """
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    ids = sorted(response_ids) if response_ids is not None else sorted(responses.rows)
    if exclude is not None:
        ids = [i for i in ids if i != exclude]
    query_vec = np.asarray(query_vec, dtype=np.float64)
    if query_vec.size != responses.dim:
        raise ShapeError(
            f"query dim {query_vec.size} != table {responses.descriptor_name!r} dim {responses.dim}"
        )
    if not ids:
        return Rank(query=query_id, ranker_index=ranker_index)
    matrix = responses.matrix(ids)
    try:
        scores = comparator.scores(query_vec, matrix)
    except _RowDomainError as exc:
        raise DomainError(f"{comparator.kind} failed for response {ids[exc.row]!r}: {exc}") from None
    # ids are pre-sorted, so a stable sort on scores realizes the id tie-break.
    order = np.argsort(scores, kind="stable")[:L]
    entries = [
        RankEntry(ids[i], float(scores[i]), None, pos)
        for pos, i in enumerate(order, start=1)
    ]
    return Rank(query=query_id, ranker_index=ranker_index, entries=entries)


def normalize_rank(rank: Rank) -> Rank:
    """Fill similarities via per-rank min-max: ``1 - (raw-min)/(max-min)``.

    A constant rank (max == min), including single-entry ranks, normalizes to
    all-ones. Order and positions are unchanged.
    """
    if not rank.entries:
        return Rank(query=rank.query, ranker_index=rank.ranker_index)
    raws = np.array([e.raw_score for e in rank.entries], dtype=np.float64)
    if not np.all(np.isfinite(raws)):
        raise DomainError(f"rank for {rank.query!r} has non-finite raw scores")
    lo, hi = float(raws.min()), float(raws.max())
    if hi == lo:
        sims = np.ones_like(raws)
    else:
        sims = 1.0 - (raws - lo) / (hi - lo)
    entries = [
        RankEntry(e.response, e.raw_score, float(s), e.position)
        for e, s in zip(rank.entries, sims)
    ]
    return Rank(query=rank.query, ranker_index=rank.ranker_index, entries=entries)


def truncate_rank(rank: Rank, L: int) -> Rank:
    """Cut a rank to its first ``L`` raw entries and re-normalize.

    Equal to recomputing the rank at cut-off ``L`` because entries are a
    prefix under the same total order.
    """
    if L < 1:
        raise DomainError(f"L must be >= 1, got {L}")
    head = Rank(
        query=rank.query,
        ranker_index=rank.ranker_index,
        entries=[RankEntry(e.response, e.raw_score, None, e.position) for e in rank.entries[:L]],
    )
    return normalize_rank(head)


class RankStore:
    """All m normalized ranks for every response sample.

    Keyed by ``(sample_id, ranker_index)``. Edge construction asks for the
    ranks of each response item, so completeness over the response set is an
    invariant checked by :meth:`require`.
    """

    def __init__(self, m: int, L: int):
        self.m = m
        self.L = L
        self._ranks: dict[tuple[str, int], Rank] = {}
        self._sorted_ids: np.ndarray | None = None
        self._coded: dict[tuple[str, int], tuple[np.ndarray, np.ndarray]] | None = None

    def put(self, rank: Rank) -> None:
        self._ranks[(rank.query, rank.ranker_index)] = rank
        self._sorted_ids = None
        self._coded = None

    def get(self, sample_id: str, ranker_index: int) -> Rank:
        return self.require(sample_id, ranker_index)

    def require(self, sample_id: str, ranker_index: int) -> Rank:
        try:
            return self._ranks[(sample_id, ranker_index)]
        except KeyError:
            raise IncompleteStoreError(
                f"no rank for sample {sample_id!r}, ranker {ranker_index}"
            ) from None

    def ranks_of(self, sample_id: str) -> list[Rank]:
        return [self.require(sample_id, j) for j in range(self.m)]

    def sample_ids(self) -> list[str]:
        return sorted({sid for sid, _ in self._ranks})

    def __len__(self) -> int:
        return len(self._ranks)

    def __iter__(self):
        return iter(sorted(self._ranks))

    def all_ranks(self) -> list[Rank]:
        return [self._ranks[k] for k in sorted(self._ranks)]

    # Integer-coded views used by the vectorized graph extraction. Codes are
    # positions in the sorted array of every id mentioned anywhere in the
    # store; encoding a rank is one vectorized sorted lookup.
    def id_codes(self) -> np.ndarray:
        if self._sorted_ids is None:
            mentioned: set[str] = set()
            for (sid, _), rank in self._ranks.items():
                mentioned.add(sid)
                mentioned.update(e.response for e in rank.entries)
            self._sorted_ids = np.array(sorted(mentioned))
        return self._sorted_ids

    def code_of(self, sample_id: str) -> int:
        ids = self.id_codes()
        return int(np.searchsorted(ids, sample_id))

    def _encode_all(self) -> dict[tuple[str, int], tuple[np.ndarray, np.ndarray]]:
        """Integer-code every stored rank in one vectorized pass."""
        ids = self.id_codes()
        keys = sorted(self._ranks)
        responses: list[str] = []
        sims: list[float] = []
        lengths: list[int] = []
        for key in keys:
            entries = self._ranks[key].entries
            lengths.append(len(entries))
            responses.extend(e.response for e in entries)
            sims.extend(0.0 if e.similarity is None else e.similarity for e in entries)
        if responses:
            codes = np.searchsorted(ids, np.array(responses)).astype(np.int64)
        else:
            codes = np.empty(0, dtype=np.int64)
        sim_arr = np.array(sims, dtype=np.float64)
        coded = {}
        offset = 0
        for key, length in zip(keys, lengths):
            coded[key] = (codes[offset : offset + length], sim_arr[offset : offset + length])
            offset += length
        return coded

    def coded_rank(self, sample_id: str, ranker_index: int) -> tuple[np.ndarray, np.ndarray]:
        """(response codes, similarities) arrays for one stored rank."""
        if self._coded is None:
            self._coded = self._encode_all()
        key = (sample_id, ranker_index)
        if key not in self._coded:
            self.require(sample_id, ranker_index)  # raises the store error
        return self._coded[key]


def worker_count() -> int:
    """Worker count for intra-stage parallelism (FUSEGRAPH_WORKERS, default 1)."""
    raw = os.environ.get("FUSEGRAPH_WORKERS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise DomainError(f"FUSEGRAPH_WORKERS must be an integer, got {raw!r}") from None
    return max(1, n)


def _parallel_map(fn, items, workers: int):
    if workers <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def build_rank_store(
    tables: dict[str, FeatureTable],
    rankers: list[Ranker],
    response_ids: Iterable[str],
    L: int,
    *,
    self_exclude: bool = True,
    workers: int | None = None,
) -> RankStore:
    """Compute the m normalized ranks of every response sample.

    Each rank is computed against ``response_ids`` with the sample itself
    excluded (default). Output is identical regardless of worker count: the
    store is keyed, and every task is a pure function of read-only tables.
    """
    ids = sorted(set(response_ids))
    for j, ranker in enumerate(rankers):
        if ranker.descriptor_name not in tables:
            raise IncompleteModalityError(
                f"ranker {j} references unknown descriptor {ranker.descriptor_name!r}"
            )
        table = tables[ranker.descriptor_name]
        for sid in ids:
            if sid not in table:
                raise IncompleteModalityError(
                    f"sample {sid!r} missing from descriptor {ranker.descriptor_name!r}"
                )
    store = RankStore(m=len(rankers), L=L)
    workers = worker_count() if workers is None else workers

    def one(task: tuple[str, int]) -> Rank:
        sid, j = task
        ranker = rankers[j]
        table = tables[ranker.descriptor_name]
        rank = compute_rank(
            table.rows[sid],
            table,
            ranker.comparator,
            L,
            exclude=sid if self_exclude else None,
            query_id=sid,
            ranker_index=j,
            response_ids=ids,
        )
        return normalize_rank(rank)

    tasks = [(sid, j) for sid in ids for j in range(len(rankers))]
    for rank in _parallel_map(one, tasks, workers):
        store.put(rank)
    return store


def query_ranks(
    tables: dict[str, FeatureTable],
    rankers: list[Ranker],
    query_id: str,
    query_vecs: dict[str, np.ndarray],
    response_ids: Iterable[str],
    L: int,
    *,
    exclude: str | None = None,
) -> list[Rank]:
    """The m normalized ranks of one query given per-descriptor vectors.

    ``query_vecs`` maps descriptor name to the query's vector under that
    descriptor; a missing descriptor is an incomplete modality.
    """
    ids = sorted(set(response_ids))
    ranks = []
    for j, ranker in enumerate(rankers):
        if ranker.descriptor_name not in query_vecs:
            raise IncompleteModalityError(
                f"query {query_id!r} missing descriptor {ranker.descriptor_name!r}"
            )
        rank = compute_rank(
            query_vecs[ranker.descriptor_name],
            tables[ranker.descriptor_name],
            ranker.comparator,
            L,
            exclude=exclude,
            query_id=query_id,
            ranker_index=j,
            response_ids=ids,
        )
        ranks.append(normalize_rank(rank))
    return ranks
