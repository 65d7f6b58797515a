"""Sparse embeddings of fusion graphs.

Three projections into vector space:

* V: one coordinate per response sample, carrying the vertex weight.
* H: the V block followed by one coordinate per unordered sample pair
  (lexicographic order), carrying the sum of both directed edge weights.
* K: a bag-of-graphs histogram. Every vertex of a fusion graph induces an
  undirected connected subgraph (the vertex, its out-neighbors, and the
  edges among them). A codebook of such subgraphs is learned by medoid
  shift over their pairwise distances, each subgraph of an input graph is
  soft-assigned to every codeword through a Gaussian kernel, and the
  assignments are average-pooled into a unit-L1 vector.

Because vertex labels are unique within a graph, the maximum common
subgraph of two induced subgraphs is their label-set intersection, which
keeps the distance linear in the vertex count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DomainError, UnknownSampleError
from .fusion_graph import FusionGraph


@dataclass
class FusionVector:
    """Sparse non-negative vector; entries are (index, value) with strictly
    increasing indices and positive values (zeros omitted)."""

    kind: str
    dim: int
    entries: list[tuple[int, float]] = field(default_factory=list)

    def __post_init__(self) -> None:
        if self.kind not in ("V", "H", "K"):
            raise DomainError(f"unknown fusion vector kind {self.kind!r}")
        last = -1
        for idx, value in self.entries:
            if not 0 <= idx < self.dim:
                raise DomainError(f"index {idx} outside [0,{self.dim})")
            if idx <= last:
                raise DomainError("entries must have strictly increasing indices")
            if value <= 0:
                raise DomainError(f"entry value must be > 0, got {value}")
            last = idx

    def nnz(self) -> int:
        return len(self.entries)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros(self.dim, dtype=np.float64)
        for idx, value in self.entries:
            dense[idx] = value
        return dense

    def l1_norm(self) -> float:
        return float(sum(v for _, v in self.entries))


@dataclass(frozen=True)
class VocabularyV:
    """Bijection between coordinate indices and response sample ids."""

    ids: tuple[str, ...]

    @property
    def index(self) -> dict[str, int]:
        if not hasattr(self, "_index"):
            object.__setattr__(self, "_index", {s: i for i, s in enumerate(self.ids)})
        return self._index

    def __len__(self) -> int:
        return len(self.ids)


def build_vocabulary(response_ids: Iterable[str]) -> VocabularyV:
    """Vocabulary in ascending id order (the documented coordinate order)."""
    return VocabularyV(ids=tuple(sorted(set(response_ids))))


def _vertex_entries(g: FusionGraph, vocab: VocabularyV) -> list[tuple[int, float]]:
    index = vocab.index
    pairs = []
    for label, weight in g.vertices.items():
        if label not in index:
            raise UnknownSampleError(f"vertex {label!r} not in vocabulary")
        pairs.append((index[label], weight))
    pairs.sort()
    return pairs


def embed_v(g: FusionGraph, vocab: VocabularyV) -> FusionVector:
    """Vertex embedding: coordinate index(v) carries the weight of v."""
    return FusionVector(kind="V", dim=len(vocab), entries=_vertex_entries(g, vocab))


def pair_index(i: int, j: int, n: int) -> int:
    """Coordinate of the unordered pair (i, j), i < j, in the H pair block.

    Pairs are enumerated lexicographically: (0,1), (0,2), ..., (1,2), ...
    """
    if not 0 <= i < j < n:
        raise DomainError(f"need 0 <= i < j < n, got i={i}, j={j}, n={n}")
    return n + i * (n - 1) - i * (i - 1) // 2 + (j - i - 1)


def embed_h(g: FusionGraph, vocab: VocabularyV) -> FusionVector:
    """Hybrid embedding: V block plus one coordinate per unordered pair.

    The pair coordinate sums both directed edge weights, so the vector is
    invariant to edge direction. Dimension is n + n(n-1)/2.
    """
    n = len(vocab)
    dim = n + n * (n - 1) // 2
    entries = dict(_vertex_entries(g, vocab))
    index = vocab.index
    for (a, b), weight in g.edges.items():
        if a not in index:
            raise UnknownSampleError(f"vertex {a!r} not in vocabulary")
        if b not in index:
            raise UnknownSampleError(f"vertex {b!r} not in vocabulary")
        if a == b:
            continue  # the pair block has no diagonal
        i, j = sorted((index[a], index[b]))
        k = pair_index(i, j, n)
        entries[k] = entries.get(k, 0.0) + weight
    return FusionVector(
        kind="H",
        dim=dim,
        entries=sorted((k, v) for k, v in entries.items() if v > 0),
    )


@dataclass
class GoI:
    """Undirected connected subgraph induced by one fusion-graph vertex."""

    center: str
    vertices: dict[str, float]
    edges: dict[tuple[str, str], float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.center not in self.vertices:
            raise DomainError(f"center {self.center!r} not among vertices")
        self._labels = frozenset(self.vertices)

    @property
    def labels(self) -> frozenset[str]:
        return self._labels

    def __len__(self) -> int:
        return len(self.vertices)


def extract_gois(g: FusionGraph, *, include_in_neighbors: bool = False) -> list[GoI]:
    """One induced subgraph per vertex: the vertex, its out-neighbors, and
    the edges among them (undirected, weights summed over directions).

    ``include_in_neighbors`` widens the neighbor set to incoming edges as
    well; the default follows outgoing edges only.
    """
    out_adj: dict[str, list[tuple[str, float]]] = {v: [] for v in g.vertices}
    in_adj: dict[str, list[str]] = {v: [] for v in g.vertices}
    for (a, b), w in g.edges.items():
        out_adj[a].append((b, w))
        in_adj[b].append(a)

    gois = []
    for center in sorted(g.vertices):
        members = {center}
        members.update(b for b, _ in out_adj[center])
        if include_in_neighbors:
            members.update(in_adj[center])
        edges: dict[tuple[str, str], float] = {}
        for a in members:
            for b, w in out_adj[a]:
                if b in members:
                    key = (a, b) if a <= b else (b, a)
                    edges[key] = edges.get(key, 0.0) + w
        gois.append(
            GoI(
                center=center,
                vertices={v: g.vertices[v] for v in sorted(members)},
                edges=dict(sorted(edges.items())),
            )
        )
    return gois


def mcs_distance(a: GoI, b: GoI) -> float:
    """Maximum-common-subgraph distance between two uniquely-labeled graphs.

    With unique vertex labels the maximum common subgraph is the label-set
    intersection, so the distance is 1 - |inter| / max(|a|, |b|): 0 for equal
    label sets, 1 for disjoint ones.
    """
    if len(a) == 0 or len(b) == 0:
        raise DomainError("mcs_distance is undefined for empty graphs")
    inter = len(a.labels & b.labels)
    return 1.0 - inter / max(len(a), len(b))


@dataclass
class Codebook:
    """Medoid subgraphs plus the Gaussian smoothing parameter for assignment."""

    words: list[GoI]
    sigma: float
    bandwidth: float

    def __post_init__(self) -> None:
        if not self.words:
            raise DomainError("codebook needs at least one word")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be > 0, got {self.sigma}")
        if self.bandwidth <= 0:
            raise DomainError(f"bandwidth must be > 0, got {self.bandwidth}")

    @property
    def dim(self) -> int:
        return len(self.words)


def _pairwise_mcs(gois: Sequence[GoI]) -> np.ndarray:
    """Dense pairwise distance matrix via a binary label-membership matrix."""
    labels = sorted(set().union(*(g.labels for g in gois)))
    col = {lab: i for i, lab in enumerate(labels)}
    member = np.zeros((len(gois), len(labels)), dtype=np.float64)
    for i, g in enumerate(gois):
        for lab in g.labels:
            member[i, col[lab]] = 1.0
    inter = member @ member.T
    sizes = member.sum(axis=1)
    larger = np.maximum(sizes[:, None], sizes[None, :])
    return 1.0 - inter / larger


def _medoid_shift_modes(dist: np.ndarray, bandwidth: float) -> list[int]:
    """Fixed points of the flat-window medoid update, one mode per cluster.

    Each point moves to the member of its bandwidth window minimizing the
    sum of squared distances to the window (ties to the smallest index);
    trajectories are followed until a fixed point or a cycle, whose smallest
    index is taken as the mode.
    """
    k = dist.shape[0]
    d2 = dist**2
    step = np.empty(k, dtype=np.int64)
    for i in range(k):
        window = np.flatnonzero(dist[i] <= bandwidth)
        cost = d2[np.ix_(window, window)].sum(axis=1)
        step[i] = window[int(np.argmin(cost))]

    mode: dict[int, int] = {}

    def settle(i: int) -> int:
        path: list[int] = []
        pos: dict[int, int] = {}
        cur = i
        while True:
            if cur in mode:
                target = mode[cur]
                break
            if cur in pos:  # cycle (a fixed point is a 1-cycle)
                target = min(path[pos[cur]:])
                break
            pos[cur] = len(path)
            path.append(cur)
            cur = int(step[cur])
        for p in path:
            mode[p] = target
        return target

    return sorted({settle(i) for i in range(k)})


def build_codebook(
    gois: Sequence[GoI],
    bandwidth: float | str = "auto",
    max_training_gois: int = 400,
    seed: int = 0,
    *,
    sigma: float | None = None,
) -> Codebook:
    """Learn codewords by medoid shift over the pairwise distance matrix.

    At most ``max_training_gois`` subgraphs are sampled uniformly (seeded)
    before the quadratic distance matrix is computed. ``bandwidth="auto"``
    uses the median off-diagonal pairwise distance (falling back to 0.5 when
    every sampled subgraph coincides); ``sigma`` defaults to bandwidth / 2.
    """
    if not gois:
        raise DomainError("cannot build a codebook from zero subgraphs")
    if max_training_gois < 1:
        raise DomainError(f"max_training_gois must be >= 1, got {max_training_gois}")
    if isinstance(bandwidth, str) and bandwidth != "auto":
        raise DomainError(f"bandwidth must be a positive number or 'auto', got {bandwidth!r}")
    if not isinstance(bandwidth, str) and bandwidth <= 0:
        raise DomainError(f"bandwidth must be > 0, got {bandwidth}")

    if len(gois) > max_training_gois:
        rng = np.random.default_rng(seed)
        chosen = np.sort(rng.choice(len(gois), size=max_training_gois, replace=False))
        sampled = [gois[i] for i in chosen.tolist()]
    else:
        sampled = list(gois)

    dist = _pairwise_mcs(sampled)
    if isinstance(bandwidth, str):
        off_diag = dist[~np.eye(len(sampled), dtype=bool)]
        med = float(np.median(off_diag)) if off_diag.size else 0.0
        bandwidth = med if med > 0 else 0.5
    modes = _medoid_shift_modes(dist, float(bandwidth))
    return Codebook(
        words=[sampled[i] for i in modes],
        sigma=float(sigma) if sigma is not None else float(bandwidth) / 2.0,
        bandwidth=float(bandwidth),
    )


def soft_assign(s: GoI, codebook: Codebook) -> np.ndarray:
    """Gaussian-kernel affinity of one subgraph to every codeword, normalized
    to sum to 1. Computed in shifted log space so tiny sigmas cannot produce
    a 0/0 row."""
    d = np.array([mcs_distance(s, w) for w in codebook.words], dtype=np.float64)
    exponents = d**2 / (2.0 * codebook.sigma**2)
    weights = np.exp(-(exponents - exponents.min()))
    return weights / weights.sum()


def embed_k(g: FusionGraph, codebook: Codebook) -> FusionVector:
    """Codebook embedding: soft-assign every induced subgraph of ``g`` and
    average-pool the assignment rows into a unit-L1 vector."""
    gois = extract_gois(g)
    if not gois:
        raise DomainError(f"graph for {g.query!r} has no vertices to pool")
    pooled = np.zeros(codebook.dim, dtype=np.float64)
    for s in gois:
        pooled += soft_assign(s, codebook)
    pooled /= len(gois)
    entries = [(int(i), float(v)) for i, v in enumerate(pooled) if v > 0]
    return FusionVector(kind="K", dim=codebook.dim, entries=entries)
