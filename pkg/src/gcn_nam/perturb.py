"""Neighbor-deletion fidelity harness.

For each evaluated node v, delete the top fraction p of its K-hop
neighbors, ranked by attribution or uniformly at random, re-run the
forward pass on v's own perturbed graph, and record accuracy as a
function of p. Attribution rankings are computed once per node on the
unperturbed graph; deletions for different central nodes never interact.

If attributions identify the nodes that carry v's classification, the
ranked curve should fall faster than the random one.

Deleting a node isolates it (edges removed, features kept), and by
default the adjacency weights are renormalized from the perturbed
degrees. Because v's logits depend only on its receptive field, each
evaluation recomputes just the K-hop rows instead of the whole graph;
the input-times-weight product of the first layer is reused across
evaluations since deletions never change features.
"""

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .attribution import AttributionQuery, RANK_ORDERS, attribute, rank_nodes
from .data import NodeDataset
from .graph import SparseGraph, build_normalized_adjacency, k_hop_neighborhood
from .model import GcnModel, forward, model_checksum, predict

STRATEGIES = ("nam", "random")
DEFAULT_P_VALUES = tuple(round(0.1 * i, 1) for i in range(10))

# guards floor(n * p) against representation error in exact multiples
_FLOOR_EPS = 1e-9

WORKERS_ENV_VAR = "GCN_NAM_THREADS"


@dataclass
class PerturbationConfig:
    p_values: tuple = DEFAULT_P_VALUES
    strategies: tuple = STRATEGIES
    rank_order: str = "signed_desc"
    num_random_seeds: int = 5
    hops: int | None = None
    split: str = "test"
    seed: int = 0
    renormalize: bool = True
    workers: int | None = None

    def __post_init__(self):
        self.p_values = tuple(float(p) for p in self.p_values)
        if any(not 0.0 <= p <= 1.0 for p in self.p_values):
            raise ValueError("p values must lie in [0, 1]")
        if any(a >= b for a, b in zip(self.p_values, self.p_values[1:])):
            raise ValueError("p values must be strictly ascending")
        if not self.p_values:
            raise ValueError("p_values must not be empty")
        self.strategies = tuple(self.strategies)
        if any(s not in STRATEGIES for s in self.strategies) or not self.strategies:
            raise ValueError(f"strategies must be drawn from {STRATEGIES}")
        if self.rank_order not in RANK_ORDERS:
            raise ValueError(f"rank_order must be one of {RANK_ORDERS}")
        if self.num_random_seeds < 1:
            raise ValueError("num_random_seeds must be >= 1")
        if self.split not in ("test", "all"):
            raise ValueError("split must be 'test' or 'all'")

    def as_dict(self) -> dict:
        return {
            "p_values": list(self.p_values),
            "strategies": list(self.strategies),
            "rank_order": self.rank_order,
            "num_random_seeds": self.num_random_seeds,
            "hops": self.hops,
            "split": self.split,
            "seed": self.seed,
            "renormalize": self.renormalize,
        }


@dataclass(eq=False)
class PerturbationCurve:
    """Accuracy per deletion fraction for one strategy.

    ``accuracies`` is the single ranked curve for "nam" and the mean over
    seeds for "random"; ``per_seed`` keeps each random seed's curve.
    """

    strategy: str
    p_values: tuple
    accuracies: tuple
    per_seed: dict = field(default_factory=dict)
    baseline_accuracy: float = 0.0
    model_checksum: str = ""
    config: dict = field(default_factory=dict)


def _workers_from_env():
    raw = os.environ.get(WORKERS_ENV_VAR, "").strip()
    if raw.isdigit() and int(raw) > 0:
        return int(raw)
    return None


def deletion_size(num_neighbors: int, p: float) -> int:
    return int(np.floor(num_neighbors * p + _FLOOR_EPS))


def _random_permutation(seed: int, v: int, neighbors: np.ndarray) -> np.ndarray:
    rng = np.random.default_rng(
        np.random.PCG64(np.random.SeedSequence([seed, v])))
    return rng.permutation(neighbors)


def deletion_set(result, graph: SparseGraph, v: int, p: float, strategy: str,
                 seed: int = 0, rank_order: str = "signed_desc") -> set:
    """The floor(|neighbors| * p) nodes to delete around v at fraction p.

    The central node is never deleted. Ranked deletion takes the top of
    the attribution ordering; random deletion takes a prefix of a seeded
    permutation (per-node stream), so sets nest as p grows either way.
    """
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if strategy not in STRATEGIES:
        raise ValueError(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    hops = result.query.hops
    hood = k_hop_neighborhood(graph, v, hops)
    neighbors = hood[hood != v]
    m = deletion_size(len(neighbors), p)
    if strategy == "nam":
        ranked = rank_nodes(result, order=rank_order, exclude_central=True)
        return set(ranked[:m])
    return set(int(u) for u in _random_permutation(seed, v, neighbors)[:m])


class _LocalEvaluator:
    """Predicts one node's class on its own perturbed receptive field.

    Only the K-hop rows are recomputed. The first layer reuses the
    precomputed features @ W1 product (deleting nodes changes edges, not
    features); deeper layers aggregate then apply their affine map.
    """

    def __init__(self, model: GcnModel, dataset: NodeDataset):
        self.model = model
        self.graph = dataset.graph
        self.first_proj = dataset.features @ model.layers[0].weight
        n = dataset.graph.num_nodes
        self._neighbors = [dataset.graph.neighbors(u).tolist() for u in range(n)]
        self._full_degree = np.array(
            [len(nb) + 1 for nb in self._neighbors], dtype=np.float64)

    def predict_node(self, v: int, doomed, renormalize: bool = True) -> int:
        model = self.model
        depth = model.depth
        doomed = frozenset(doomed)

        if renormalize:
            alive_cache, deg_cache = {}, {}

            def alive(u: int) -> list:
                if u not in alive_cache:
                    alive_cache[u] = [w for w in self._neighbors[u]
                                      if w not in doomed]
                return alive_cache[u]

            def deg(u: int) -> float:
                if u not in deg_cache:
                    deg_cache[u] = float(len(alive(u)) + 1)
                return deg_cache[u]
        else:
            # ablation mode: edges and weights stay, doomed features are zeroed
            def alive(u: int) -> list:
                return self._neighbors[u]

            def deg(u: int) -> float:
                return float(self._full_degree[u])

        # H_l is needed on the closed (depth - l)-hop rows around v
        rows_per_layer = [[v]]
        for _ in range(depth - 1):
            reach = set(rows_per_layer[-1])
            for u in rows_per_layer[-1]:
                reach.update(alive(u))
            rows_per_layer.append(sorted(reach))

        def proj(u: int) -> np.ndarray:
            if not renormalize and u in doomed:
                return np.zeros(self.first_proj.shape[1])
            return self.first_proj[u]

        layer = model.layers[0]
        current = {}
        for u in rows_per_layer[-1]:
            agg = (1.0 / deg(u)) * proj(u)
            for w in alive(u):
                agg = agg + (1.0 / np.sqrt(deg(u) * deg(w))) * proj(w)
            z = agg + layer.bias
            current[u] = np.maximum(z, 0.0) if layer.activation == "relu" else z

        for l in range(1, depth):
            layer = model.layers[l]
            nxt = {}
            for u in rows_per_layer[depth - 1 - l]:
                agg = (1.0 / deg(u)) * current[u]
                for w in alive(u):
                    agg = agg + (1.0 / np.sqrt(deg(u) * deg(w))) * current[w]
                z = agg @ layer.weight + layer.bias
                nxt[u] = np.maximum(z, 0.0) if layer.activation == "relu" else z
            current = nxt

        return int(np.argmax(current[v]))


def run_perturbation(model: GcnModel, dataset: NodeDataset,
                     config: PerturbationConfig) -> list:
    """Accuracy curves over the deletion fractions, one per strategy.

    Rankings come from one attribution per node against the model's
    predicted class on the unperturbed graph. Every evaluation is
    independent; results are deterministic for fixed seeds regardless of
    worker count (aggregation is in node-id order).
    """
    adj = build_normalized_adjacency(dataset.graph)
    trace = forward(model, adj, dataset.features)
    preds = predict(trace)
    hops = model.depth if config.hops is None else int(config.hops)

    targets = dataset.test_nodes if config.split == "test" \
        else np.arange(dataset.num_nodes, dtype=np.int64)
    targets = np.sort(targets)
    if not len(targets):
        raise ValueError(f"no nodes to evaluate in split {config.split!r}")

    evaluator = _LocalEvaluator(model, dataset)
    random_seeds = [config.seed + s for s in range(config.num_random_seeds)]

    def eval_node(v: int) -> dict:
        v = int(v)
        hood = k_hop_neighborhood(dataset.graph, v, hops)
        neighbors = hood[hood != v]
        correct = {}

        orderings = {}
        if "nam" in config.strategies:
            result = attribute(model, adj, trace,
                               AttributionQuery(v, int(preds[v]), hops))
            ranked = rank_nodes(result, order=config.rank_order,
                                exclude_central=True)
            orderings[("nam", 0)] = ranked
        if "random" in config.strategies:
            for s in random_seeds:
                orderings[("random", s)] = list(
                    _random_permutation(s, v, neighbors))

        label = int(dataset.labels[v])
        cache = {}
        for (strategy, s), order in orderings.items():
            for p in config.p_values:
                m = deletion_size(len(neighbors), p)
                doomed = frozenset(int(u) for u in order[:m])
                if doomed not in cache:
                    cache[doomed] = evaluator.predict_node(
                        v, doomed, config.renormalize) == label
                correct[(strategy, s, p)] = cache[doomed]
        return correct

    workers = config.workers or _workers_from_env() or os.cpu_count() or 1
    if workers > 1 and len(targets) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            per_node = list(pool.map(eval_node, targets))
    else:
        per_node = [eval_node(v) for v in targets]

    def curve_acc(strategy: str, s: int) -> tuple:
        return tuple(
            float(np.mean([res[(strategy, s, p)] for res in per_node]))
            for p in config.p_values)

    checksum = model_checksum(model)
    curves = []
    for strategy in config.strategies:
        if strategy == "nam":
            acc = curve_acc("nam", 0)
            per_seed = {}
        else:
            per_seed = {s: curve_acc("random", s) for s in random_seeds}
            acc = tuple(float(np.mean([per_seed[s][k] for s in random_seeds]))
                        for k in range(len(config.p_values)))
        baseline = acc[config.p_values.index(0.0)] if 0.0 in config.p_values \
            else float("nan")
        curves.append(PerturbationCurve(
            strategy=strategy, p_values=config.p_values, accuracies=acc,
            per_seed=per_seed, baseline_accuracy=baseline,
            model_checksum=checksum, config=config.as_dict()))
    return curves


def write_curves_tsv(curves, path) -> None:
    """Tab-separated per-seed rows: strategy, seed, p, accuracy."""
    lines = ["strategy\tseed\tp\taccuracy"]
    for curve in curves:
        seed_map = curve.per_seed if curve.per_seed else {0: curve.accuracies}
        for seed in sorted(seed_map):
            for p, acc in zip(curve.p_values, seed_map[seed]):
                lines.append(f"{curve.strategy}\t{seed}\t{p:.6f}\t{acc:.6f}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def write_curves_json(curves, path) -> None:
    doc = {"curves": [{
        "strategy": c.strategy,
        "p_values": list(c.p_values),
        "accuracies": list(c.accuracies),
        "per_seed": {str(s): list(v) for s, v in sorted(c.per_seed.items())},
        "baseline_accuracy": c.baseline_accuracy,
        "model_checksum": c.model_checksum,
        "config": c.config,
    } for c in curves]}
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def read_curves_json(path) -> list:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        curves = []
        for c in doc["curves"]:
            curves.append(PerturbationCurve(
                strategy=c["strategy"],
                p_values=tuple(c["p_values"]),
                accuracies=tuple(c["accuracies"]),
                per_seed={int(s): tuple(v) for s, v in c["per_seed"].items()},
                baseline_accuracy=c.get("baseline_accuracy", 0.0),
                model_checksum=c.get("model_checksum", ""),
                config=c.get("config", {})))
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"malformed curves file {path}: {exc}") from None
    return curves
