"""Round trip between the converter's output and the dataset loader.

Runs only when the standalone converter package is installed; the
upstream files are fabricated at the converter's documented layout. The
published-count checks against the real datasets live in the acceptance
suite and are gated on the data being present.
"""

import json
import pickle

import numpy as np
import pytest
import scipy.sparse as sp

from gcn_nam.data import load_dataset

planetoid_convert = pytest.importorskip("planetoid_convert")


def _write_upstream(root, name="cora"):
    root.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(77)
    num_feat, num_cls = 6, 3
    allx = sp.csr_matrix((rng.random((7, num_feat)) < 0.4) * 1.0)
    x = allx[:3]
    y = np.eye(num_cls)[[0, 1, 2]]
    ally = np.eye(num_cls)[[0, 1, 2, 0, 1, 2, 0]]
    test_ids = [9, 7, 8, 10]
    tx = sp.csr_matrix((rng.random((4, num_feat)) < 0.4) * 1.0)
    ty = np.eye(num_cls)[[i % num_cls for i in test_ids]]
    links = [(0, 1), (1, 7), (2, 8), (3, 9), (9, 10), (4, 5)]
    graph = {i: [] for i in range(11)}
    for u, w in links:
        graph[u].append(w)
        graph[w].append(u)
    for part, obj in (("x", x), ("y", y), ("tx", tx), ("ty", ty),
                      ("allx", allx), ("ally", ally), ("graph", graph)):
        with open(root / f"ind.{name}.{part}", "wb") as fh:
            pickle.dump(obj, fh)
    (root / f"ind.{name}.test.index").write_text(
        "".join(f"{i}\n" for i in test_ids))


def test_converted_output_loads_with_matching_counts(tmp_path):
    upstream = tmp_path / "upstream"
    _write_upstream(upstream)
    out = tmp_path / "portable"
    manifest = planetoid_convert.convert(upstream, "cora", out)

    ds = load_dataset(out)
    assert ds.num_nodes == manifest.num_nodes
    assert ds.num_features == manifest.num_features
    assert ds.num_classes == manifest.num_classes
    assert ds.graph.num_edges == manifest.distinct_undirected_edge_count
    assert ds.raw_link_count == manifest.distinct_undirected_edge_count
    assert len(ds.train_nodes) == manifest.train_size
    assert len(ds.val_nodes) == manifest.val_size
    assert len(ds.test_nodes) == manifest.test_size

    with open(out / "manifest.json", encoding="utf-8") as fh:
        on_disk = json.load(fh)
    assert on_disk["num_nodes"] == manifest.num_nodes
