"""Fusion-graph extraction from normalized ranks.

A fusion graph aggregates the m ranks of one query into a weighted directed
graph. A vertex exists for every response sample found in any rank of the
query; its weight is the sum of the similarities that sample has across the
query's ranks. A directed edge A->B exists when both endpoints are vertices
and B occurs in some rank of A; the edge accumulates B's similarity in each
rank of A, divided by A's position in each rank of the query that contains A
(the double sum runs over all rank pairs).

Vertices and edges whose accumulated weight is exactly zero are omitted:
with per-rank min-max normalization a rank's tail entry has similarity 0,
and a zero-weight element carries no information for the embeddings.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from .errors import DomainError
from .ranker import Rank, RankStore


@dataclass
class FusionGraph:
    """Weighted directed graph over response samples for one query."""

    query: str
    m: int
    L: int
    vertices: dict[str, float] = field(default_factory=dict)
    edges: dict[tuple[str, str], float] = field(default_factory=dict)

    def vertex_count(self) -> int:
        return len(self.vertices)

    def edge_count(self) -> int:
        return len(self.edges)

    def out_neighbors(self, vertex: str) -> list[str]:
        return sorted(b for (a, b) in self.edges if a == vertex)


@dataclass(frozen=True)
class GraphStats:
    vertex_count: int
    edge_count: int
    vertex_weight_range: tuple[float, float] | None
    edge_weight_range: tuple[float, float] | None


def _check_query_ranks(query_ranks: list[Rank]) -> str:
    if not query_ranks:
        raise DomainError("need at least one query rank")
    query = query_ranks[0].query
    for rank in query_ranks:
        if rank.query != query:
            raise DomainError(
                f"query ranks mix queries {query!r} and {rank.query!r}"
            )
        for e in rank.entries:
            if e.similarity is None:
                raise DomainError(f"rank for {query!r} is not normalized")
    return query


def extract_fusion_graph(query_ranks: list[Rank], store: RankStore) -> FusionGraph:
    """Build the fusion graph of one query from its m normalized ranks.

    ``store`` must contain the m ranks of every response sample appearing in
    ``query_ranks``; a missing one raises ``IncompleteStoreError``. The
    result does not depend on the order of ``query_ranks``.
    """
    query = _check_query_ranks(query_ranks)
    if len(query_ranks) != store.m:
        raise DomainError(
            f"got {len(query_ranks)} query ranks but store holds m={store.m}"
        )
    m, L = store.m, store.L

    # Vertex weights (sum of similarities) and the reciprocal-position factor
    # shared by every outgoing edge of a vertex.
    weights: dict[str, float] = {}
    pos_factor: dict[str, float] = {}
    for rank in query_ranks:
        if len(rank.entries) > L:
            raise DomainError(f"rank of {query!r} longer than store cut-off L={L}")
        for e in rank.entries:
            weights[e.response] = weights.get(e.response, 0.0) + e.similarity
            pos_factor[e.response] = pos_factor.get(e.response, 0.0) + 1.0 / e.position

    # Completeness of the store is part of the contract even for vertices
    # that end up dropped below.
    for sample_id in weights:
        for j in range(m):
            store.require(sample_id, j)

    kept = sorted(v for v, w in weights.items() if w > 0.0)
    graph = FusionGraph(
        query=query,
        m=m,
        L=L,
        vertices={v: weights[v] for v in kept},
    )
    if not kept:
        return graph

    # Vectorized edge accumulation over integer-coded ranks: every
    # occurrence of a kept vertex B in a rank of a kept vertex A adds
    # sim(A,B) * sum(1/pos(A)) to the edge A->B. Contributions for all
    # vertices of one ranker are concatenated and summed in one sparse pass.
    codes = store.id_codes()
    k = len(kept)
    lookup = np.full(len(codes), -1, dtype=np.int64)
    lookup[np.searchsorted(codes, np.array(kept))] = np.arange(k)
    pf = np.array([pos_factor[v] for v in kept])
    rows_parts, cols_parts, weight_parts = [], [], []
    for j in range(m):
        coded = [store.coded_rank(v, j) for v in kept]
        resp = np.concatenate([c[0] for c in coded])
        if resp.size == 0:
            continue
        sims = np.concatenate([c[1] for c in coded])
        rows = np.repeat(np.arange(k), [c[0].size for c in coded])
        loc = lookup[resp]
        mask = (loc >= 0) & (sims > 0.0)
        rows_parts.append(rows[mask])
        cols_parts.append(loc[mask])
        weight_parts.append(sims[mask] * pf[rows[mask]])
    if rows_parts:
        acc = sparse.coo_matrix(
            (
                np.concatenate(weight_parts),
                (np.concatenate(rows_parts), np.concatenate(cols_parts)),
            ),
            shape=(k, k),
        ).tocsr()  # duplicate (A,B) contributions sum here
        acc.sort_indices()
        coo = acc.tocoo()
        for a_idx, b_idx, w in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist()):
            if w > 0.0:
                graph.edges[(kept[a_idx], kept[b_idx])] = w
    return graph


def graph_stats(g: FusionGraph) -> GraphStats:
    """Exact counts and tight weight ranges for a fusion graph."""
    vw = list(g.vertices.values())
    ew = list(g.edges.values())
    return GraphStats(
        vertex_count=len(vw),
        edge_count=len(ew),
        vertex_weight_range=(min(vw), max(vw)) if vw else None,
        edge_weight_range=(min(ew), max(ew)) if ew else None,
    )
