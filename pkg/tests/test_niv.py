import numpy as np
import pytest

from gcn_nam.attribution import AttributionQuery, AttributionResult, attribute
from gcn_nam.graph import SparseGraph, build_normalized_adjacency, k_hop_neighborhood
from gcn_nam.model import forward, predict
from gcn_nam.niv import (
    CLASS_PALETTE,
    build_niv,
    class_color,
    emit_dot,
    emit_json,
    parse_json,
)

from conftest import random_instance


def make_result(contributions, v=0, hops=1):
    return AttributionResult(query=AttributionQuery(v, 0, hops),
                             per_node=dict(contributions),
                             per_dimension={}, gradient={})


class TestBuildNiv:
    def test_all_equal_contributions_map_to_midpoint(self, star_path_graph):
        result = make_result({0: 0.5, 1: 0.5, 2: 0.5, 3: 0.5})
        doc = build_niv(result, [0, 1, 0, 1, 0], star_path_graph, hops=1)
        sizes = [n.size for n in doc.nodes]
        assert sizes == [pytest.approx(0.5 * (0.3 + 2.0))] * 4

    def test_sizes_strictly_increase_with_magnitude(self, star_path_graph):
        result = make_result({0: 0.0, 1: 1.0, 2: 2.0, 3: 1.5})
        doc = build_niv(result, [0, 0, 0, 0, 0], star_path_graph, hops=1)
        by_id = {n.id: n.size for n in doc.nodes}
        assert by_id[0] < by_id[1] < by_id[3] < by_id[2]
        assert by_id[0] == pytest.approx(0.3)
        assert by_id[2] == pytest.approx(2.0)

    def test_negative_contributions_sized_by_magnitude(self, star_path_graph):
        result = make_result({0: 0.0, 1: -3.0, 2: 1.0, 3: 2.0})
        doc = build_niv(result, [0, 0, 0, 0, 0], star_path_graph, hops=1)
        by_id = {n.id: n.size for n in doc.nodes}
        assert by_id[1] == max(by_id.values())

    def test_node_set_is_neighborhood(self, star_path_graph):
        result = make_result({0: 1.0, 1: 2.0, 2: 0.5, 3: 0.1, 4: 0.7}, hops=2)
        doc = build_niv(result, [0] * 5, star_path_graph, hops=2)
        assert doc.node_ids() == k_hop_neighborhood(star_path_graph, 0, 2).tolist()
        assert set(doc.edges) == {(0, 1), (0, 2), (0, 3), (3, 4)}

    def test_hop_distance_recorded(self, star_path_graph):
        result = make_result({0: 1.0, 1: 2.0, 2: 0.5, 3: 0.1, 4: 0.7}, hops=2)
        doc = build_niv(result, [0] * 5, star_path_graph, hops=2)
        hop = {n.id: n.hop_distance for n in doc.nodes}
        assert hop == {0: 0, 1: 1, 2: 1, 3: 1, 4: 2}

    def test_isolated_central_node(self):
        graph = SparseGraph(3, [(1, 2)])
        result = make_result({0: 0.25})
        doc = build_niv(result, [1, 0, 0], graph, hops=1)
        assert doc.node_ids() == [0]
        assert doc.edges == ()

    def test_uncovered_neighborhood_rejected(self, star_path_graph):
        result = make_result({0: 1.0, 1: 2.0})  # nodes 2, 3 missing
        with pytest.raises(ValueError):
            build_niv(result, [0] * 5, star_path_graph, hops=1)

    def test_palette_covers_classes(self):
        assert len(CLASS_PALETTE) >= 10
        assert class_color(CLASS_PALETTE, 3) == CLASS_PALETTE[3]
        assert class_color(CLASS_PALETTE, 13) == CLASS_PALETTE[3]


class TestEmitDot:
    def _doc(self, star_path_graph):
        result = make_result({0: 1.0, 1: -2.0, 2: 0.5, 3: 0.1})
        return build_niv(result, [0, 1, 2, 1, 0], star_path_graph, hops=1)

    def test_single_node_document(self):
        graph = SparseGraph(1)
        doc = build_niv(make_result({0: 1.0}), [0], graph, hops=1)
        text = emit_dot(doc)
        assert text.startswith("graph node_importance {")
        assert 'n0 [label="0"' in text
        assert "peripheries=2" in text  # the central node

    def test_deterministic_bytes(self, star_path_graph):
        doc = self._doc(star_path_graph)
        assert emit_dot(doc) == emit_dot(doc)

    def test_counts_and_styles(self, star_path_graph):
        doc = self._doc(star_path_graph)
        text = emit_dot(doc)
        node_lines = [l for l in text.splitlines() if "[label=" in l]
        edge_lines = [l for l in text.splitlines() if " -- " in l]
        assert len(node_lines) == 4
        assert len(edge_lines) == 3
        dashed = [l for l in node_lines if "dashed" in l]
        assert len(dashed) == 1 and "n1 " in dashed[0]

    def test_five_node_two_hop_document(self, star_path_graph):
        result = make_result({0: 1.0, 1: 2.0, 2: 0.5, 3: 0.1, 4: 0.7}, hops=2)
        doc = build_niv(result, [0] * 5, star_path_graph, hops=2)
        text = emit_dot(doc)
        assert sum(1 for l in text.splitlines() if "[label=" in l) == 5
        assert sum(1 for l in text.splitlines() if " -- " in l) == 4


class TestJsonRoundTrip:
    def test_lossless(self, star_path_graph):
        rng = np.random.default_rng(40)
        graph, adj, x, model, trace = random_instance(rng, 8, (3, 4, 3))
        result = attribute(model, adj, trace, AttributionQuery(0, 1))
        doc = build_niv(result, predict(trace), graph, hops=2)
        again = parse_json(emit_json(doc))
        assert again == doc

    def test_single_node_roundtrip(self):
        graph = SparseGraph(1)
        doc = build_niv(make_result({0: -0.123456789123456}), [0], graph, hops=1)
        assert parse_json(emit_json(doc)) == doc

    def test_malformed_rejected(self):
        with pytest.raises(ValueError):
            parse_json('{"nodes": []}')
