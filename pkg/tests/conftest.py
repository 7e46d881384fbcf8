import numpy as np
import pytest

from gcn_nam.graph import SparseGraph, build_normalized_adjacency
from gcn_nam.model import GcnLayer, GcnModel, forward


@pytest.fixture
def star_path_graph():
    """5-node fixture: hub 0 joined to 1, 2, 3, and a pendant 4 behind 3.

    Node 4 is exactly two hops from node 0, so a 2-layer model reaches it
    and a 1-layer model does not.
    """
    return SparseGraph(5, [(0, 1), (0, 2), (0, 3), (3, 4)])


def random_graph(rng, num_nodes, edge_prob=0.3):
    iu, ju = np.triu_indices(num_nodes, k=1)
    keep = rng.random(len(iu)) < edge_prob
    return SparseGraph(num_nodes, np.stack([iu[keep], ju[keep]], axis=1))


def random_model(rng, dims, relu_hidden=True, zero_bias=False):
    """Model with the given dimension chain; final layer always linear."""
    layers = []
    for i, (d_in, d_out) in enumerate(zip(dims, dims[1:])):
        last = i == len(dims) - 2
        act = "linear" if last or not relu_hidden else "relu"
        w = rng.normal(0.0, 1.0, (d_in, d_out)) / np.sqrt(d_in)
        b = np.zeros(d_out) if zero_bias else rng.normal(0.0, 0.1, d_out)
        layers.append(GcnLayer(w, b, act))
    return GcnModel(layers=tuple(layers))


def random_instance(rng, num_nodes=8, dims=(4, 6, 3), edge_prob=0.35,
                    relu_hidden=True, zero_bias=False):
    """(graph, adj, features, model, trace) drawn from one rng."""
    graph = random_graph(rng, num_nodes, edge_prob)
    model = random_model(rng, dims, relu_hidden, zero_bias)
    features = rng.normal(0.0, 1.0, (num_nodes, dims[0]))
    adj = build_normalized_adjacency(graph)
    trace = forward(model, adj, features)
    return graph, adj, features, model, trace
