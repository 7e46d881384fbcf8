"""Sparse undirected graphs and the symmetric-normalized adjacency operator.

Node ids are dense integers ``0..num_nodes-1``. Graphs are immutable once
constructed; "mutation" (e.g. node deletion) returns a new graph. The
normalized operator adds a self-loop to every node and weights the pair
(i, j) by ``1/sqrt(d_i * d_j)`` where ``d`` counts degree including the
self-loop.
"""

import numpy as np
import scipy.sparse as sp


class GraphError(ValueError):
    """Invalid node id, malformed edge, or out-of-range query."""


class SparseGraph:
    """Undirected graph stored as a deduplicated edge list.

    Edges are canonicalized to ``(u, v)`` with ``u < v``. Self-loops are
    rejected here; the normalized adjacency adds its own. Neighbor lists
    are precomputed in ascending order so every traversal is
    deterministic.
    """

    __slots__ = ("num_nodes", "_edges", "_indptr", "_indices")

    def __init__(self, num_nodes: int, edges=()):
        if num_nodes < 0:
            raise GraphError(f"num_nodes must be >= 0, got {num_nodes}")
        self.num_nodes = int(num_nodes)

        pairs = np.asarray(list(edges), dtype=np.int64).reshape(-1, 2)
        if pairs.size:
            if pairs.min() < 0 or pairs.max() >= num_nodes:
                raise GraphError(
                    f"edge endpoint out of range 0..{num_nodes - 1}")
            if np.any(pairs[:, 0] == pairs[:, 1]):
                raise GraphError("self-loops are not allowed")
            lo = np.minimum(pairs[:, 0], pairs[:, 1])
            hi = np.maximum(pairs[:, 0], pairs[:, 1])
            pairs = np.unique(np.stack([lo, hi], axis=1), axis=0)
        self._edges = pairs
        self._edges.setflags(write=False)

        # Both directions, sorted by (node, neighbor) -> flat neighbor lists.
        if pairs.size:
            src = np.concatenate([pairs[:, 0], pairs[:, 1]])
            dst = np.concatenate([pairs[:, 1], pairs[:, 0]])
            order = np.lexsort((dst, src))
            src, dst = src[order], dst[order]
        else:
            src = dst = np.empty(0, dtype=np.int64)
        counts = np.bincount(src, minlength=num_nodes)
        self._indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self._indices = dst
        self._indptr.setflags(write=False)
        self._indices.setflags(write=False)

    @property
    def edges(self) -> np.ndarray:
        """Canonical (E, 2) array of edges with u < v, lexicographically sorted."""
        return self._edges

    @property
    def num_edges(self) -> int:
        return len(self._edges)

    def neighbors(self, v: int) -> np.ndarray:
        """Ascending neighbor ids of v (no self)."""
        self._check_node(v)
        return self._indices[self._indptr[v]:self._indptr[v + 1]]

    def degree(self, v: int) -> int:
        self._check_node(v)
        return int(self._indptr[v + 1] - self._indptr[v])

    def _check_node(self, v) -> None:
        if not (0 <= int(v) < self.num_nodes):
            raise GraphError(f"node id {v} out of range 0..{self.num_nodes - 1}")

    def __eq__(self, other) -> bool:
        return (isinstance(other, SparseGraph)
                and self.num_nodes == other.num_nodes
                and np.array_equal(self._edges, other._edges))

    def __hash__(self):
        return hash((self.num_nodes, self._edges.tobytes()))

    def __repr__(self) -> str:
        return f"SparseGraph(num_nodes={self.num_nodes}, num_edges={self.num_edges})"


class NormalizedAdjacency:
    """Symmetric-normalized adjacency with self-loops, in row-sorted sparse form.

    Entry (i, j) is ``1/sqrt(d_i * d_j)`` with ``d`` the self-loop-inclusive
    degree; the diagonal is always present. Each unordered pair's weight is
    computed once and stored in both directions, so the operator is
    bitwise symmetric.
    """

    __slots__ = ("num_nodes", "indptr", "indices", "data", "degrees", "_csr")

    def __init__(self, num_nodes, indptr, indices, data, degrees):
        self.num_nodes = int(num_nodes)
        self.indptr = indptr
        self.indices = indices
        self.data = data
        self.degrees = degrees
        for arr in (indptr, indices, data, degrees):
            arr.setflags(write=False)
        self._csr = None

    @property
    def num_entries(self) -> int:
        return len(self.indices)

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """(neighbor ids incl. self, weights) for row i, ascending ids."""
        s, e = self.indptr[i], self.indptr[i + 1]
        return self.indices[s:e], self.data[s:e]

    def entry(self, i: int, j: int) -> float:
        """Matrix entry (i, j); 0.0 when the pair is not adjacent."""
        if not (0 <= i < self.num_nodes and 0 <= j < self.num_nodes):
            raise GraphError(f"entry ({i}, {j}) out of range")
        cols, vals = self.row(i)
        k = np.searchsorted(cols, j)
        if k < len(cols) and cols[k] == j:
            return float(vals[k])
        return 0.0

    def items(self):
        """Yield ((i, j), weight) for every stored entry in row-major order."""
        for i in range(self.num_nodes):
            cols, vals = self.row(i)
            for j, w in zip(cols, vals):
                yield (i, int(j)), float(w)

    def matmul(self, dense: np.ndarray) -> np.ndarray:
        """Row-wise aggregation: returns self @ dense for a dense (N, d) matrix."""
        if dense.shape[0] != self.num_nodes:
            raise GraphError(
                f"matrix has {dense.shape[0]} rows, expected {self.num_nodes}")
        if self._csr is None:
            self._csr = sp.csr_matrix(
                (self.data, self.indices, self.indptr),
                shape=(self.num_nodes, self.num_nodes))
        return self._csr @ dense

    def toarray(self) -> np.ndarray:
        out = np.zeros((self.num_nodes, self.num_nodes))
        for (i, j), w in self.items():
            out[i, j] = w
        return out


def build_normalized_adjacency(graph: SparseGraph) -> NormalizedAdjacency:
    """Build the normalized operator for ``graph``.

    Degrees include the self-loop, so an isolated node gets the 1x1 block
    [[1.0]] and the entry count is ``2 * num_edges + num_nodes``.
    """
    n = graph.num_nodes
    deg = np.diff(graph._indptr) + 1  # self-loop included

    edges = graph.edges
    w_edge = 1.0 / np.sqrt(deg[edges[:, 0]] * deg[edges[:, 1]]) if len(edges) \
        else np.empty(0)
    w_diag = 1.0 / np.sqrt(deg.astype(np.float64) * deg) if n else np.empty(0)

    rows = np.concatenate([edges[:, 0], edges[:, 1], np.arange(n, dtype=np.int64)])
    cols = np.concatenate([edges[:, 1], edges[:, 0], np.arange(n, dtype=np.int64)])
    vals = np.concatenate([w_edge, w_edge, w_diag])

    order = np.lexsort((cols, rows))
    rows, cols, vals = rows[order], cols[order], vals[order]
    counts = np.bincount(rows, minlength=n)
    indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
    return NormalizedAdjacency(n, indptr, cols, vals, deg.astype(np.int64))


def k_hop_neighborhood(graph: SparseGraph, v: int, hops: int) -> np.ndarray:
    """All nodes within ``hops`` edges of v, including v, ascending ids."""
    graph._check_node(v)
    if hops < 0:
        raise GraphError(f"hop count must be >= 0, got {hops}")
    visited = np.zeros(graph.num_nodes, dtype=bool)
    visited[v] = True
    frontier = np.array([v], dtype=np.int64)
    for _ in range(hops):
        if not len(frontier):
            break
        nxt = np.unique(np.concatenate(
            [graph.neighbors(int(u)) for u in frontier]))
        nxt = nxt[~visited[nxt]]
        visited[nxt] = True
        frontier = nxt
    return np.flatnonzero(visited).astype(np.int64)


def remove_nodes(graph: SparseGraph, doomed) -> SparseGraph:
    """Drop every edge touching a doomed node; the id space is preserved.

    Doomed nodes become isolated (they keep their self-loop under the
    normalized operator), so all downstream index bookkeeping stays valid.
    """
    doomed = set(int(d) for d in doomed)
    for d in doomed:
        graph._check_node(d)
    if not doomed:
        return graph
    edges = graph.edges
    if not len(edges):
        return SparseGraph(graph.num_nodes)
    mask = np.fromiter(
        ((u not in doomed and v not in doomed) for u, v in edges),
        dtype=bool, count=len(edges))
    return SparseGraph(graph.num_nodes, edges[mask])
