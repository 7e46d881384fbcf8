"""Dataset loading, saving, and synthetic generation.

Portable on-disk directory layout (all text, UTF-8, LF line endings):

    meta.json      {"num_nodes": N, "num_features": F, "num_classes": C}
    edges.tsv      one edge per line, ``u<TAB>v``
    features.tsv   sparse triplets ``node<TAB>dim<TAB>value``
    labels.tsv     ``node<TAB>class``, one line per node
    splits.json    {"train": [...], "val": [...], "test": [...]}

Raw edge lists may contain duplicates, reversed pairs, and self-loops;
the loader deduplicates into undirected edges and keeps the raw line
count around for reporting. All randomness comes from NumPy's PCG64
generator so synthetic datasets reproduce bit-identically for a seed.
"""

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .graph import SparseGraph

TRAIN_FRACTION = 0.3
VAL_FRACTION = 0.3
FEATURE_NOISE_SCALE = 0.1


class DatasetError(ValueError):
    """Missing file, malformed line, or inconsistent dataset contents."""


@dataclass(eq=False)
class NodeDataset:
    """A labeled node-classification dataset on a single fixed graph."""

    graph: SparseGraph
    features: np.ndarray          # (num_nodes, num_features) float64
    labels: np.ndarray            # (num_nodes,) int64
    num_classes: int
    train_nodes: np.ndarray
    val_nodes: np.ndarray
    test_nodes: np.ndarray
    raw_link_count: int = field(default=0)

    def __post_init__(self):
        n = self.graph.num_nodes
        self.features = np.ascontiguousarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != n:
            raise DatasetError(
                f"feature matrix has {self.features.shape[0]} rows for {n} nodes")
        if self.labels.shape != (n,):
            raise DatasetError(f"labels must have length {n}")
        if n and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise DatasetError(
                f"labels must lie in 0..{self.num_classes - 1}")
        splits = {}
        for name in ("train_nodes", "val_nodes", "test_nodes"):
            ids = np.unique(np.asarray(getattr(self, name), dtype=np.int64))
            if len(ids) and (ids.min() < 0 or ids.max() >= n):
                raise DatasetError(f"{name} contains out-of-range node ids")
            setattr(self, name, ids)
            splits[name] = set(ids.tolist())
        for a in splits:
            for b in splits:
                if a < b and splits[a] & splits[b]:
                    raise DatasetError(f"splits {a} and {b} overlap")

    @property
    def num_nodes(self) -> int:
        return self.graph.num_nodes

    @property
    def num_features(self) -> int:
        return self.features.shape[1]


def _read_lines(path: Path) -> list[str]:
    if not path.is_file():
        raise DatasetError(f"missing dataset file: {path}")
    return path.read_text(encoding="utf-8").splitlines()


def _parse_int(token: str, where: str) -> int:
    try:
        return int(token)
    except ValueError:
        raise DatasetError(f"{where}: not an integer: {token!r}") from None


def load_dataset(path, normalize: bool = True) -> NodeDataset:
    """Load a dataset from a portable-format directory.

    With ``normalize`` (default), each feature row is divided by its sum
    when the sum is nonzero, so row magnitudes are comparable across
    nodes. Loading is a pure function of the file bytes.
    """
    root = Path(path)
    meta_path = root / "meta.json"
    if not meta_path.is_file():
        raise DatasetError(f"missing dataset file: {meta_path}")
    try:
        meta = json.loads(meta_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{meta_path}: invalid JSON: {exc}") from None
    for key in ("num_nodes", "num_features", "num_classes"):
        if not isinstance(meta.get(key), int) or meta[key] < 0:
            raise DatasetError(f"{meta_path}: bad or missing {key!r}")
    n, num_feat, num_classes = meta["num_nodes"], meta["num_features"], meta["num_classes"]

    edges_path = root / "edges.tsv"
    raw_links = 0
    pairs = []
    for lineno, line in enumerate(_read_lines(edges_path), start=1):
        if not line.strip():
            continue
        where = f"{edges_path}:{lineno}"
        parts = line.split("\t")
        if len(parts) != 2:
            raise DatasetError(f"{where}: expected 'u<TAB>v', got {line!r}")
        u, v = (_parse_int(p, where) for p in parts)
        if not (0 <= u < n and 0 <= v < n):
            raise DatasetError(f"{where}: node id out of range 0..{n - 1}")
        raw_links += 1
        if u != v:  # self-loop lines count as raw links but are not stored
            pairs.append((u, v))
    graph = SparseGraph(n, pairs)

    feats_path = root / "features.tsv"
    features = np.zeros((n, num_feat))
    for lineno, line in enumerate(_read_lines(feats_path), start=1):
        if not line.strip():
            continue
        where = f"{feats_path}:{lineno}"
        parts = line.split("\t")
        if len(parts) != 3:
            raise DatasetError(f"{where}: expected 'node<TAB>dim<TAB>value'")
        node, dim = _parse_int(parts[0], where), _parse_int(parts[1], where)
        if not (0 <= node < n and 0 <= dim < num_feat):
            raise DatasetError(f"{where}: index out of range")
        try:
            features[node, dim] = float(parts[2])
        except ValueError:
            raise DatasetError(f"{where}: not a number: {parts[2]!r}") from None

    labels_path = root / "labels.tsv"
    labels = np.full(n, -1, dtype=np.int64)
    for lineno, line in enumerate(_read_lines(labels_path), start=1):
        if not line.strip():
            continue
        where = f"{labels_path}:{lineno}"
        parts = line.split("\t")
        if len(parts) != 2:
            raise DatasetError(f"{where}: expected 'node<TAB>class'")
        node, cls = (_parse_int(p, where) for p in parts)
        if not 0 <= node < n:
            raise DatasetError(f"{where}: node id out of range")
        if not 0 <= cls < num_classes:
            raise DatasetError(f"{where}: class out of range 0..{num_classes - 1}")
        if labels[node] != -1:
            raise DatasetError(f"{where}: duplicate label for node {node}")
        labels[node] = cls
    if n and labels.min() < 0:
        missing = int(np.flatnonzero(labels < 0)[0])
        raise DatasetError(f"{labels_path}: no label for node {missing}")

    splits_path = root / "splits.json"
    if not splits_path.is_file():
        raise DatasetError(f"missing dataset file: {splits_path}")
    try:
        splits = json.loads(splits_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise DatasetError(f"{splits_path}: invalid JSON: {exc}") from None
    split_ids = {}
    for key in ("train", "val", "test"):
        ids = splits.get(key)
        if not isinstance(ids, list):
            raise DatasetError(f"{splits_path}: missing list {key!r}")
        split_ids[key] = ids
    seen = {}
    for key, ids in split_ids.items():
        for i in ids:
            if i in seen:
                raise DatasetError(
                    f"{splits_path}: node {i} in both {seen[i]!r} and {key!r}")
            seen[i] = key

    if normalize:
        sums = features.sum(axis=1)
        nonzero = sums != 0.0
        features[nonzero] /= sums[nonzero, None]

    return NodeDataset(
        graph=graph, features=features, labels=labels, num_classes=num_classes,
        train_nodes=np.array(split_ids["train"], dtype=np.int64),
        val_nodes=np.array(split_ids["val"], dtype=np.int64),
        test_nodes=np.array(split_ids["test"], dtype=np.int64),
        raw_link_count=raw_links)


def save_dataset(dataset: NodeDataset, path) -> None:
    """Write ``dataset`` to a portable-format directory, deterministically.

    Feature values are written with 17 significant digits so a save/load
    round trip (with ``normalize=False``) reproduces them exactly.
    """
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    meta = {"num_nodes": dataset.num_nodes,
            "num_features": dataset.num_features,
            "num_classes": dataset.num_classes}
    (root / "meta.json").write_text(json.dumps(meta) + "\n", encoding="utf-8")

    with open(root / "edges.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for u, v in dataset.graph.edges:
            fh.write(f"{u}\t{v}\n")

    with open(root / "features.tsv", "w", encoding="utf-8", newline="\n") as fh:
        rows, dims = np.nonzero(dataset.features)
        for r, d in zip(rows, dims):
            fh.write(f"{r}\t{d}\t{dataset.features[r, d]:.17g}\n")

    with open(root / "labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for node, cls in enumerate(dataset.labels):
            fh.write(f"{node}\t{cls}\n")

    splits = {"train": dataset.train_nodes.tolist(),
              "val": dataset.val_nodes.tolist(),
              "test": dataset.test_nodes.tolist()}
    (root / "splits.json").write_text(json.dumps(splits) + "\n", encoding="utf-8")


def generate_synthetic(num_nodes: int, num_classes: int, num_features: int,
                       intra_edge_prob: float, inter_edge_prob: float,
                       feature_signal: float, seed: int) -> NodeDataset:
    """Generate a planted-partition dataset for desk-scale experiments.

    Node i gets class ``i % num_classes``. Each unordered pair is an edge
    with probability ``intra_edge_prob`` (same class) or
    ``inter_edge_prob`` (different class). Features are Gaussian noise of
    scale 0.1 plus ``feature_signal`` added at the class-indexed
    dimension. Splits are stratified per class at roughly 30/30/40.
    Deterministic for a fixed seed (single PCG64 stream, fixed draw
    order: edges, features, splits).
    """
    if num_classes <= 0:
        raise DatasetError(f"num_classes must be >= 1, got {num_classes}")
    if num_nodes < num_classes:
        raise DatasetError(
            f"num_nodes ({num_nodes}) must be >= num_classes ({num_classes})")
    if num_features <= 0:
        raise DatasetError(f"num_features must be >= 1, got {num_features}")
    for name, p in (("intra_edge_prob", intra_edge_prob),
                    ("inter_edge_prob", inter_edge_prob)):
        if not 0.0 <= p <= 1.0:
            raise DatasetError(f"{name} must be a probability in [0, 1], got {p}")

    rng = np.random.default_rng(np.random.PCG64(seed))
    labels = np.arange(num_nodes, dtype=np.int64) % num_classes

    iu, ju = np.triu_indices(num_nodes, k=1)
    probs = np.where(labels[iu] == labels[ju], intra_edge_prob, inter_edge_prob)
    keep = rng.random(len(iu)) < probs
    graph = SparseGraph(num_nodes, np.stack([iu[keep], ju[keep]], axis=1))

    features = rng.normal(0.0, FEATURE_NOISE_SCALE, (num_nodes, num_features))
    features[np.arange(num_nodes), labels % num_features] += feature_signal

    train, val, test = [], [], []
    for cls in range(num_classes):
        members = np.flatnonzero(labels == cls)
        perm = rng.permutation(members)
        m = len(perm)
        n_train = max(1, int(m * TRAIN_FRACTION + 0.5))
        n_val = min(max(1, int(m * VAL_FRACTION + 0.5)), m - n_train)
        train.extend(perm[:n_train])
        val.extend(perm[n_train:n_train + n_val])
        test.extend(perm[n_train + n_val:])

    return NodeDataset(
        graph=graph, features=features, labels=labels, num_classes=num_classes,
        train_nodes=np.array(sorted(train), dtype=np.int64),
        val_nodes=np.array(sorted(val), dtype=np.int64),
        test_nodes=np.array(sorted(test), dtype=np.int64),
        raw_link_count=graph.num_edges)
