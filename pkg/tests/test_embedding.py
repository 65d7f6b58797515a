import numpy as np
import pytest

from fusegraph.embedding import (
    Codebook,
    FusionVector,
    GoI,
    build_codebook,
    build_vocabulary,
    embed_h,
    embed_k,
    embed_v,
    extract_gois,
    mcs_distance,
    pair_index,
    soft_assign,
)
from fusegraph.errors import DomainError, UnknownSampleError
from fusegraph.fusion_graph import FusionGraph, extract_fusion_graph

from helpers import exhaustive_mcs_size, random_rank_instance


def graph(vertices, edges=None, m=2, L=5):
    return FusionGraph("q", m, L, vertices=dict(vertices), edges=dict(edges or {}))


def random_graphs(rng, count, n=20, m=2, L=5):
    out = []
    while len(out) < count:
        query_ranks, store = random_rank_instance(rng, n, m, L)
        g = extract_fusion_graph(query_ranks, store)
        if g.vertex_count():
            out.append(g)
    return out


class TestEmbedV:
    def test_empty_graph_is_zero_vector(self):
        vocab = build_vocabulary(["a", "b", "c"])
        vec = embed_v(graph({}), vocab)
        assert vec.dim == 3 and vec.entries == []

    def test_direct_indexing(self):
        vocab = build_vocabulary(["A", "B", "C"])
        vec = embed_v(graph({"A": 1.4, "B": 0.7}), vocab)
        assert vec.entries == [(0, 1.4), (1, 0.7)]
        assert vec.dim == 3 and vec.kind == "V"

    def test_unknown_vertex(self):
        vocab = build_vocabulary(["A"])
        with pytest.raises(UnknownSampleError, match="Z"):
            embed_v(graph({"Z": 1.0}), vocab)

    def test_nonzeros_bounded_and_weights_exact(self):
        rng = np.random.default_rng(10)
        for g in random_graphs(rng, 20):
            vocab = build_vocabulary([f"s{i}" for i in range(20)])
            vec = embed_v(g, vocab)
            assert vec.nnz() <= g.m * g.L
            dense = vec.to_dense()
            for label, weight in g.vertices.items():
                assert dense[vocab.index[label]] == weight


class TestEmbedH:
    def test_no_edges_matches_embed_v(self):
        vocab = build_vocabulary(["A", "B", "C"])
        g = graph({"A": 1.0, "B": 0.5})
        assert embed_h(g, vocab).entries == embed_v(g, vocab).entries
        assert embed_h(g, vocab).dim == 3 + 3

    def test_pair_coordinate_sums_directions(self):
        vocab = build_vocabulary(["A", "B", "C"])
        g = graph({"A": 1.4, "B": 0.7}, {("A", "B"): 0.75, ("B", "A"): 0.25})
        vec = embed_h(g, vocab)
        assert vec.dim == 6
        assert (3, 1.0) in vec.entries  # pair (0,1) sits right after the vertex block

    def test_direction_swap_invariant(self):
        vocab = build_vocabulary(["A", "B", "C"])
        g1 = graph({"A": 1.0, "B": 0.5}, {("A", "B"): 0.4})
        g2 = graph({"A": 1.0, "B": 0.5}, {("B", "A"): 0.4})
        assert embed_h(g1, vocab).entries == embed_h(g2, vocab).entries

    def test_vertex_block_equals_embed_v(self):
        rng = np.random.default_rng(11)
        vocab = build_vocabulary([f"s{i}" for i in range(20)])
        n = len(vocab)
        for g in random_graphs(rng, 10):
            hv = embed_h(g, vocab).to_dense()
            assert np.array_equal(hv[:n], embed_v(g, vocab).to_dense())
            assert embed_h(g, vocab).dim == n + n * (n - 1) // 2

    def test_pair_index_enumeration(self):
        n = 5
        seen = set()
        for i in range(n):
            for j in range(i + 1, n):
                seen.add(pair_index(i, j, n))
        assert seen == set(range(n, n + n * (n - 1) // 2))


class TestExtractGois:
    def test_isolated_vertex(self):
        gois = extract_gois(graph({"v": 1.0}))
        assert len(gois) == 1
        assert gois[0].center == "v" and set(gois[0].vertices) == {"v"}
        assert gois[0].edges == {}

    def test_out_neighbors_and_edges_between(self):
        g = graph(
            {"v": 1.0, "a": 0.5, "b": 0.4},
            {("v", "a"): 0.3, ("v", "b"): 0.2, ("a", "b"): 0.1},
        )
        goi = {x.center: x for x in extract_gois(g)}["v"]
        assert set(goi.vertices) == {"v", "a", "b"}
        assert set(goi.edges) == {("a", "v"), ("b", "v"), ("a", "b")}
        assert goi.vertices["a"] == 0.5  # weights preserved

    def test_one_goi_per_vertex(self):
        rng = np.random.default_rng(12)
        for g in random_graphs(rng, 10):
            assert len(extract_gois(g)) == g.vertex_count()

    def test_undirected_weights_sum_directions(self):
        g = graph({"v": 1.0, "a": 0.5}, {("v", "a"): 0.3, ("a", "v"): 0.2})
        goi = {x.center: x for x in extract_gois(g)}["v"]
        assert goi.edges[("a", "v")] == pytest.approx(0.5)

    def test_in_neighbor_option(self):
        g = graph({"v": 1.0, "a": 0.5}, {("a", "v"): 0.3})
        default = {x.center: set(x.vertices) for x in extract_gois(g)}
        widened = {x.center: set(x.vertices) for x in extract_gois(g, include_in_neighbors=True)}
        assert default["v"] == {"v"}
        assert widened["v"] == {"v", "a"}


class TestMcsDistance:
    def test_identity(self):
        a = GoI("a", {"a": 1.0, "b": 0.5})
        assert mcs_distance(a, a) == 0.0

    def test_disjoint(self):
        a = GoI("a", {"a": 1.0})
        b = GoI("b", {"b": 1.0})
        assert mcs_distance(a, b) == 1.0

    def test_hand_value(self):
        a = GoI("a", {"a": 1, "b": 1, "c": 1})
        b = GoI("b", {"b": 1, "c": 1, "d": 1})
        assert mcs_distance(a, b) == pytest.approx(1 / 3)

    def test_matches_exhaustive_enumeration(self):
        rng = np.random.default_rng(13)
        alphabet = [f"v{i}" for i in range(9)]
        for _ in range(60):
            la = list(rng.choice(alphabet, size=int(rng.integers(1, 7)), replace=False))
            lb = list(rng.choice(alphabet, size=int(rng.integers(1, 7)), replace=False))
            a = GoI(la[0], {v: 1.0 for v in la})
            b = GoI(lb[0], {v: 1.0 for v in lb})
            expected = 1.0 - exhaustive_mcs_size(la, {}, lb, {}) / max(len(la), len(lb))
            assert mcs_distance(a, b) == expected
            assert mcs_distance(b, a) == expected

    def test_empty_rejected(self):
        a = GoI("a", {"a": 1.0})
        bad = GoI("a", {"a": 1.0})
        bad.vertices = {}
        with pytest.raises(DomainError):
            mcs_distance(a, bad)


class TestBuildCodebook:
    def test_identical_gois_single_word(self):
        gois = [GoI("a", {"a": 1.0, "b": 0.5}) for _ in range(5)]
        cb = build_codebook(gois, bandwidth=0.5)
        assert cb.dim == 1

    def test_two_separated_groups(self):
        group1 = [GoI("a", {"a": 1, "b": 1}) for _ in range(3)]
        group2 = [GoI("x", {"x": 1, "y": 1}) for _ in range(4)]
        cb = build_codebook(group1 + group2, bandwidth=0.5)
        assert cb.dim == 2
        labels = {frozenset(w.vertices) for w in cb.words}
        assert labels == {frozenset({"a", "b"}), frozenset({"x", "y"})}

    def test_single_training_goi(self):
        gois = [GoI(f"g{i}", {f"g{i}": 1.0}) for i in range(10)]
        cb = build_codebook(gois, bandwidth=0.5, max_training_gois=1, seed=3)
        assert cb.dim == 1
        assert cb.words[0].center in {f"g{i}" for i in range(10)}

    def test_invalid_bandwidth(self):
        with pytest.raises(DomainError):
            build_codebook([GoI("a", {"a": 1.0})], bandwidth=0.0)
        with pytest.raises(DomainError):
            build_codebook([GoI("a", {"a": 1.0})], bandwidth=-1.0)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(14)
        gois = [goi for g in random_graphs(rng, 15) for goi in extract_gois(g)]
        a = build_codebook(gois, bandwidth=0.6, max_training_gois=30, seed=5)
        b = build_codebook(gois, bandwidth=0.6, max_training_gois=30, seed=5)
        assert [w.center for w in a.words] == [w.center for w in b.words]
        assert [dict(w.vertices) for w in a.words] == [dict(w.vertices) for w in b.words]
        assert a.sigma == b.sigma and a.bandwidth == b.bandwidth

    def test_sigma_default_is_half_bandwidth(self):
        cb = build_codebook([GoI("a", {"a": 1.0})], bandwidth=0.8)
        assert cb.sigma == pytest.approx(0.4)


class TestSoftAssign:
    def codebook(self, sigma=1.0):
        return Codebook(
            words=[GoI("a", {"a": 1, "b": 1}), GoI("x", {"x": 1, "y": 1})],
            sigma=sigma,
            bandwidth=0.5,
        )

    def test_single_word_row(self):
        cb = Codebook(words=[GoI("a", {"a": 1})], sigma=1.0, bandwidth=0.5)
        assert soft_assign(GoI("z", {"z": 1}), cb).tolist() == [1.0]

    def test_equidistant(self):
        cb = self.codebook()
        row = soft_assign(GoI("z", {"z": 1}), cb)  # distance 1 to both words
        assert row == pytest.approx([0.5, 0.5])

    def test_gaussian_values(self):
        row = soft_assign(GoI("a", {"a": 1, "b": 1}), self.codebook(sigma=1.0))
        k0 = np.exp(0.0) / np.sqrt(2 * np.pi)
        k1 = np.exp(-0.5) / np.sqrt(2 * np.pi)
        assert row == pytest.approx([k0 / (k0 + k1), k1 / (k0 + k1)], abs=1e-9)
        assert row == pytest.approx([0.6225, 0.3775], abs=1e-4)

    def test_rows_sum_to_one_and_positive(self):
        rng = np.random.default_rng(15)
        gois = [goi for g in random_graphs(rng, 5) for goi in extract_gois(g)]
        cb = build_codebook(gois, bandwidth=0.6, max_training_gois=20, seed=1, sigma=0.3)
        for goi in gois[:40]:
            row = soft_assign(goi, cb)
            assert row.sum() == pytest.approx(1.0, abs=1e-9)
            assert np.all(row > 0)

    def test_large_sigma_tends_uniform(self):
        cb = self.codebook(sigma=1e6)
        row = soft_assign(GoI("a", {"a": 1, "c": 1}), cb)
        assert row == pytest.approx([0.5, 0.5], abs=1e-3)

    def test_tiny_sigma_is_stable(self):
        row = soft_assign(GoI("a", {"a": 1, "b": 1}), self.codebook(sigma=1e-4))
        assert np.isfinite(row).all()
        assert row.sum() == pytest.approx(1.0)
        assert row[0] == pytest.approx(1.0)


class TestEmbedK:
    def test_single_vertex_single_word(self):
        cb = Codebook(words=[GoI("a", {"a": 1})], sigma=1.0, bandwidth=0.5)
        vec = embed_k(graph({"v": 1.0}), cb)
        assert vec.entries == [(0, 1.0)] and vec.kind == "K"

    def test_averaging(self):
        # Two isolated vertices whose label sets exactly match one word each.
        cb = Codebook(
            words=[GoI("a", {"a": 1}), GoI("b", {"b": 1})],
            sigma=0.05,
            bandwidth=0.5,
        )
        vec = embed_k(graph({"a": 1.0, "b": 0.5}), cb)
        assert vec.to_dense() == pytest.approx([0.5, 0.5], abs=1e-6)

    def test_l1_norm_one(self):
        rng = np.random.default_rng(16)
        graphs = random_graphs(rng, 10)
        gois = [goi for g in graphs for goi in extract_gois(g)]
        cb = build_codebook(gois, bandwidth=0.6, max_training_gois=30, seed=2)
        for g in graphs:
            assert embed_k(g, cb).l1_norm() == pytest.approx(1.0, abs=1e-9)

    def test_empty_graph_rejected(self):
        cb = Codebook(words=[GoI("a", {"a": 1})], sigma=1.0, bandwidth=0.5)
        with pytest.raises(DomainError):
            embed_k(graph({}), cb)


class TestFusionVectorInvariants:
    def test_entry_validation(self):
        with pytest.raises(DomainError):
            FusionVector(kind="V", dim=3, entries=[(1, 1.0), (1, 2.0)])
        with pytest.raises(DomainError):
            FusionVector(kind="V", dim=3, entries=[(0, 0.0)])
        with pytest.raises(DomainError):
            FusionVector(kind="V", dim=3, entries=[(5, 1.0)])
        with pytest.raises(DomainError):
            FusionVector(kind="Q", dim=3, entries=[])
