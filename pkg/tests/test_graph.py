import numpy as np
import pytest

from gcn_nam.graph import (
    GraphError,
    SparseGraph,
    build_normalized_adjacency,
    k_hop_neighborhood,
    remove_nodes,
)

from conftest import random_graph


class TestSparseGraph:
    def test_canonicalizes_and_dedupes(self):
        g = SparseGraph(4, [(1, 0), (0, 1), (2, 3), (3, 2), (0, 1)])
        assert g.num_edges == 2
        assert g.edges.tolist() == [[0, 1], [2, 3]]

    def test_rejects_out_of_range(self):
        with pytest.raises(GraphError):
            SparseGraph(3, [(0, 3)])
        with pytest.raises(GraphError):
            SparseGraph(3, [(-1, 2)])

    def test_rejects_self_loop(self):
        with pytest.raises(GraphError):
            SparseGraph(3, [(1, 1)])

    def test_neighbors_sorted(self):
        g = SparseGraph(5, [(2, 4), (2, 0), (2, 3)])
        assert g.neighbors(2).tolist() == [0, 3, 4]
        assert g.neighbors(1).tolist() == []

    def test_empty_graph(self):
        g = SparseGraph(0)
        assert g.num_nodes == 0 and g.num_edges == 0


class TestNormalizedAdjacency:
    def test_single_node_is_identity(self):
        adj = build_normalized_adjacency(SparseGraph(1))
        assert adj.num_entries == 1
        assert adj.entry(0, 0) == 1.0

    def test_zero_nodes(self):
        adj = build_normalized_adjacency(SparseGraph(0))
        assert adj.num_entries == 0
        assert adj.toarray().shape == (0, 0)

    def test_two_nodes_one_edge(self):
        # both degrees are 2 with the self-loop, so every weight is 1/2
        adj = build_normalized_adjacency(SparseGraph(2, [(0, 1)]))
        for i in range(2):
            for j in range(2):
                assert adj.entry(i, j) == pytest.approx(0.5, rel=1e-15)

    def test_entry_count(self, star_path_graph):
        adj = build_normalized_adjacency(star_path_graph)
        assert adj.num_entries == 2 * star_path_graph.num_edges + 5

    def test_bitwise_symmetric(self):
        rng = np.random.default_rng(11)
        g = random_graph(rng, 12, 0.4)
        adj = build_normalized_adjacency(g)
        for (i, j), w in adj.items():
            assert adj.entry(j, i) == w  # exact, not approximate

    def test_weights_match_degree_formula(self):
        rng = np.random.default_rng(12)
        g = random_graph(rng, 15, 0.3)
        adj = build_normalized_adjacency(g)
        deg = {v: g.degree(v) + 1 for v in range(15)}
        for (i, j), w in adj.items():
            expected = 1.0 / np.sqrt(deg[i] * deg[j])
            assert w == pytest.approx(expected, rel=1e-15)

    def test_diagonal_present_positive_entries_bounded(self):
        rng = np.random.default_rng(13)
        g = random_graph(rng, 10, 0.5)
        adj = build_normalized_adjacency(g)
        for v in range(10):
            assert adj.entry(v, v) > 0.0
        assert all(0.0 < w <= 1.0 for _, w in adj.items())

    def test_matmul_matches_dense(self):
        rng = np.random.default_rng(14)
        g = random_graph(rng, 9, 0.4)
        adj = build_normalized_adjacency(g)
        h = rng.normal(size=(9, 4))
        np.testing.assert_allclose(adj.matmul(h), adj.toarray() @ h, rtol=1e-13)


class TestKHopNeighborhood:
    def test_zero_hops_is_self(self, star_path_graph):
        assert k_hop_neighborhood(star_path_graph, 2, 0).tolist() == [2]

    def test_one_hop(self, star_path_graph):
        assert k_hop_neighborhood(star_path_graph, 0, 1).tolist() == [0, 1, 2, 3]

    def test_two_hops_reach_pendant(self, star_path_graph):
        assert k_hop_neighborhood(star_path_graph, 0, 2).tolist() == [0, 1, 2, 3, 4]

    def test_monotone_in_hops(self):
        rng = np.random.default_rng(15)
        g = random_graph(rng, 14, 0.2)
        for v in range(14):
            prev = set()
            for hops in range(4):
                cur = set(k_hop_neighborhood(g, v, hops).tolist())
                assert prev <= cur
                prev = cur

    def test_invalid_node(self, star_path_graph):
        with pytest.raises(GraphError):
            k_hop_neighborhood(star_path_graph, 5, 1)
        with pytest.raises(GraphError):
            k_hop_neighborhood(star_path_graph, 0, -1)


class TestRemoveNodes:
    def test_empty_deletion_is_identity(self, star_path_graph):
        assert remove_nodes(star_path_graph, set()) == star_path_graph

    def test_removing_bridge_disconnects(self, star_path_graph):
        cut = remove_nodes(star_path_graph, {3})
        assert cut.edges.tolist() == [[0, 1], [0, 2]]
        assert 4 not in k_hop_neighborhood(cut, 0, 4).tolist()

    def test_id_space_preserved(self, star_path_graph):
        cut = remove_nodes(star_path_graph, {3})
        assert cut.num_nodes == star_path_graph.num_nodes
        assert cut.neighbors(3).tolist() == []

    def test_deletion_renormalizes_survivors(self):
        # the surviving endpoint's diagonal weight goes from 1/2 to 1
        g = SparseGraph(2, [(0, 1)])
        before = build_normalized_adjacency(g)
        after = build_normalized_adjacency(remove_nodes(g, {1}))
        assert before.entry(0, 0) == 0.5
        assert after.entry(0, 0) == 1.0
        assert after.entry(0, 1) == 0.0

    def test_invalid_doomed_id(self, star_path_graph):
        with pytest.raises(GraphError):
            remove_nodes(star_path_graph, {9})
