"""Shared test fixtures: independent oracle implementations and random
instance generators. Everything here is deliberately naive so it cannot
share bugs with the library code it checks."""

from __future__ import annotations

import numpy as np

from fusegraph.ranker import Rank, RankEntry, RankStore


def mk_rank(query: str, ranker_index: int, entries: list[tuple[str, float, int]]) -> Rank:
    """Build a normalized rank from (response, similarity, position) triples.

    Raw scores are synthesized from positions so entries stay sorted.
    """
    return Rank(
        query,
        ranker_index,
        [RankEntry(resp, float(pos), sim, pos) for resp, sim, pos in entries],
    )


def naive_fusion_graph(query_ranks: list[Rank], store: RankStore):
    """Literal quadruple-loop transcription of the vertex and edge rules.

    Vertex weight: sum of the similarities the sample has in the query's
    ranks. Edge weight: for every rank of the query containing A and every
    rank of A containing B, add sim(A,B) divided by A's position in the
    query's rank. Zero-weight elements are dropped at the end, mirroring
    the library's sparsity convention.
    """
    vertices: dict[str, float] = {}
    for rank in query_ranks:
        for entry in rank.entries:
            vertices[entry.response] = vertices.get(entry.response, 0.0) + entry.similarity

    edges: dict[tuple[str, str], float] = {}
    for rank_i in query_ranks:
        for entry_a in rank_i.entries:
            a = entry_a.response
            for j in range(store.m):
                for entry_b in store.get(a, j).entries:
                    b = entry_b.response
                    if b in vertices:
                        key = (a, b)
                        edges[key] = edges.get(key, 0.0) + (
                            entry_b.similarity / entry_a.position
                        )

    vertices = {v: w for v, w in vertices.items() if w > 0.0}
    edges = {
        k: w
        for k, w in edges.items()
        if w > 0.0 and k[0] in vertices and k[1] in vertices
    }
    return vertices, edges


def random_rank_instance(rng: np.random.Generator, n: int, m: int, L: int):
    """A complete random store over n samples plus m query ranks.

    Similarities are drawn from [0.05, 1] (sorted decreasing per rank) so
    exact zeros, which the sparsity convention drops, never occur.
    """
    ids = [f"s{i}" for i in range(n)]
    store = RankStore(m=m, L=L)
    for sid in ids:
        others = [o for o in ids if o != sid]
        for j in range(m):
            k = int(rng.integers(0, min(L, len(others)) + 1))
            chosen = list(rng.choice(others, size=k, replace=False)) if k else []
            sims = np.sort(rng.uniform(0.05, 1.0, size=k))[::-1]
            store.put(
                mk_rank(sid, j, [(c, float(sims[i]), i + 1) for i, c in enumerate(chosen)])
            )
    query_ranks = []
    for j in range(m):
        k = int(rng.integers(0, L + 1))
        chosen = list(rng.choice(ids, size=min(k, n), replace=False)) if k else []
        sims = np.sort(rng.uniform(0.05, 1.0, size=len(chosen)))[::-1]
        query_ranks.append(
            mk_rank("q", j, [(c, float(sims[i]), i + 1) for i, c in enumerate(chosen)])
        )
    return query_ranks, store


def exhaustive_mcs_size(labels_a: list[str], edges_a, labels_b: list[str], edges_b) -> int:
    """Largest common subgraph size by explicit subset enumeration.

    Vertices carry unique labels, so a candidate subset of a's vertices maps
    into b exactly when b contains every label; any edge subset common to
    both sides is a valid (not necessarily induced) subgraph, so the vertex
    count alone decides maximality.
    """
    best = 0
    b_set = set(labels_b)
    n = len(labels_a)
    for mask in range(1 << n):
        subset = [labels_a[i] for i in range(n) if mask >> i & 1]
        if all(lab in b_set for lab in subset):
            best = max(best, len(subset))
    return best


def brute_force_ap_at_k(relevance: list[bool], k: int) -> float:
    """AP@K via explicit prefix slicing (quadratic, no running counters)."""
    total_relevant = sum(1 for r in relevance if r)
    if total_relevant == 0:
        return 0.0
    acc = 0.0
    for i in range(1, k + 1):
        if relevance[i - 1]:
            prefix = relevance[:i]
            acc += sum(1 for r in prefix if r) / i
    return acc / min(k, total_relevant)
