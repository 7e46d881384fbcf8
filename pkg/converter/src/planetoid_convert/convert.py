"""One-shot converter from the upstream serialized citation datasets to a
portable text directory.

Upstream layout (one directory, files per dataset name):

    ind.<name>.x           pickled scipy sparse matrix, training features
    ind.<name>.y           pickled one-hot array, training labels
    ind.<name>.tx, .ty     test features / labels
    ind.<name>.allx, .ally all non-test features / labels
    ind.<name>.graph       pickled dict: node id -> list of neighbor ids
    ind.<name>.test.index  text file of test node ids, one per line

Output layout (UTF-8, LF):

    meta.json      {"num_nodes": N, "num_features": F, "num_classes": C}
    edges.tsv      distinct undirected edges, `u<TAB>v` with u < v
    features.tsv   sparse triplets `node<TAB>dim<TAB>value`
    labels.tsv     `node<TAB>class`
    splits.json    {"train": [...], "val": [...], "test": [...]}
    manifest.json  counts for cross-checking, see ConversionManifest

Node ids follow the upstream convention: the non-test rows keep their
stacked order and test rows are placed at the ids listed in test.index
(the index file order is not sorted). Test ids missing from a contiguous
index span (citeseer has a few isolated test documents) get zero feature
rows and are left out of every split; the count is recorded in the
manifest. The adjacency lists store both directions of every raw link,
duplicates included, so half the total entry count is the raw link count
of the original citation file.
"""

import json
import pickle
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
import scipy.sparse as sp

DATASET_NAMES = ("cora", "citeseer", "pubmed")
VALIDATION_SIZE = 500

_PARTS = ("x", "y", "tx", "ty", "allx", "ally", "graph")


class ConvertError(ValueError):
    """Missing upstream file, unknown dataset, or inconsistent contents."""


@dataclass
class ConversionManifest:
    dataset_name: str
    num_nodes: int
    num_features: int
    num_classes: int
    raw_link_count: int
    distinct_undirected_edge_count: int
    train_size: int
    val_size: int
    test_size: int
    zero_filled_test_nodes: int


def _load_pickle(path: Path):
    if not path.is_file():
        raise ConvertError(f"missing upstream file: {path}")
    with open(path, "rb") as fh:
        # upstream pickles were written by Python 2
        return pickle.load(fh, encoding="latin1")


def _load_test_index(path: Path) -> list:
    if not path.is_file():
        raise ConvertError(f"missing upstream file: {path}")
    ids = []
    for lineno, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            ids.append(int(line))
        except ValueError:
            raise ConvertError(f"{path}:{lineno}: not an integer: {line!r}") from None
    if not ids:
        raise ConvertError(f"{path}: empty test index")
    return ids


def convert(input_dir, dataset_name: str, output_dir) -> ConversionManifest:
    """Convert one dataset and write the portable directory plus manifest."""
    if dataset_name not in DATASET_NAMES:
        raise ConvertError(
            f"unknown dataset {dataset_name!r}, expected one of {DATASET_NAMES}")
    input_dir = Path(input_dir)

    parts = {p: _load_pickle(input_dir / f"ind.{dataset_name}.{p}")
             for p in _PARTS}
    test_idx = _load_test_index(input_dir / f"ind.{dataset_name}.test.index")
    x, y = parts["x"], parts["y"]
    tx, ty = parts["tx"], parts["ty"]
    allx, ally = parts["allx"], parts["ally"]
    graph = parts["graph"]

    test_sorted = np.sort(test_idx)
    span = range(int(test_sorted[0]), int(test_sorted[-1]) + 1)
    zero_filled = len(span) - len(test_idx)
    if zero_filled:
        # isolated test documents missing from the index get zero rows
        tx_ext = sp.lil_matrix((len(span), x.shape[1]))
        tx_ext[test_sorted - span.start, :] = tx
        tx = tx_ext
        ty_ext = np.zeros((len(span), y.shape[1]))
        ty_ext[test_sorted - span.start, :] = ty
        ty = ty_ext

    features = sp.vstack((sp.csr_matrix(allx), sp.csr_matrix(tx))).tolil()
    labels_onehot = np.vstack((ally, ty))
    num_nodes = features.shape[0]
    if span.start != allx.shape[0] or span.stop != num_nodes:
        raise ConvertError(
            f"test index span {span.start}..{span.stop - 1} does not follow "
            f"the {allx.shape[0]} non-test rows")

    # test rows were stacked in index-file order; move them to their ids
    features[test_idx, :] = features[test_sorted, :]
    labels_onehot[test_idx, :] = labels_onehot[test_sorted, :]
    labels = np.argmax(labels_onehot, axis=1)

    raw_entries = 0
    undirected = set()
    for u, nbrs in graph.items():
        u = int(u)
        if not 0 <= u < num_nodes:
            raise ConvertError(f"graph key {u} out of range 0..{num_nodes - 1}")
        for w in nbrs:
            w = int(w)
            if not 0 <= w < num_nodes:
                raise ConvertError(
                    f"graph neighbor {w} of {u} out of range 0..{num_nodes - 1}")
            raw_entries += 1
            if u != w:
                undirected.add((u, w) if u < w else (w, u))
    # both directions of every raw link are stored, duplicates included
    raw_link_count = raw_entries // 2
    edges = sorted(undirected)

    train_ids = list(range(y.shape[0]))
    val_stop = min(y.shape[0] + VALIDATION_SIZE, allx.shape[0])
    val_ids = list(range(y.shape[0], val_stop))
    test_ids = [int(t) for t in test_sorted]

    out = Path(output_dir)
    out.mkdir(parents=True, exist_ok=True)
    meta = {"num_nodes": int(num_nodes), "num_features": int(x.shape[1]),
            "num_classes": int(y.shape[1])}
    (out / "meta.json").write_text(json.dumps(meta) + "\n", encoding="utf-8")

    with open(out / "edges.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for u, w in edges:
            fh.write(f"{u}\t{w}\n")

    csr = features.tocsr()
    csr.sort_indices()
    with open(out / "features.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for node in range(num_nodes):
            start, stop = csr.indptr[node], csr.indptr[node + 1]
            for dim, value in zip(csr.indices[start:stop], csr.data[start:stop]):
                if value != 0.0:
                    fh.write(f"{node}\t{dim}\t{value:.17g}\n")

    with open(out / "labels.tsv", "w", encoding="utf-8", newline="\n") as fh:
        for node in range(num_nodes):
            fh.write(f"{node}\t{int(labels[node])}\n")

    splits = {"train": train_ids, "val": val_ids, "test": test_ids}
    (out / "splits.json").write_text(json.dumps(splits) + "\n", encoding="utf-8")

    manifest = ConversionManifest(
        dataset_name=dataset_name,
        num_nodes=int(num_nodes),
        num_features=int(x.shape[1]),
        num_classes=int(y.shape[1]),
        raw_link_count=int(raw_link_count),
        distinct_undirected_edge_count=len(edges),
        train_size=len(train_ids),
        val_size=len(val_ids),
        test_size=len(test_ids),
        zero_filled_test_nodes=int(zero_filled),
    )
    (out / "manifest.json").write_text(
        json.dumps(asdict(manifest), indent=2) + "\n", encoding="utf-8")
    return manifest
