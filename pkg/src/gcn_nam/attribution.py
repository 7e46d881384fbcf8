"""Per-node contributions to a single node's class logit.

The contribution of node u to the class-c logit of central node v is a
gradient-times-input score summed over u's feature dimensions. The
gradient flows through every active path of the layered computation: at
each layer a path crosses one adjacency weight (the neighborhood
aggregation, self-loops included) and one fully connected map whose
Jacobian is the weight matrix masked by the node's relu pattern.

``attribute`` computes all contributions in one reverse sweep seeded at
(v, c), pulling the cotangent back through the affine map transpose and
then through the adjacency weights, layer by layer. This sums over all
active paths without enumerating them, and it touches only rows inside
the receptive field, so everything outside the K-hop neighborhood is
zero by construction.

Two independent checks are provided: ``path_enumeration_oracle``
multiplies out every node path literally and sums the products, and
``finite_difference_gradient`` estimates the same gradient numerically
with central differences.
"""

import json
from dataclasses import dataclass

import numpy as np

from .graph import NormalizedAdjacency
from .model import ForwardTrace, GcnModel, forward

DEFAULT_PATH_LIMIT = 1_000_000

RANK_ORDERS = ("signed_desc", "abs_desc")


class PathCountError(RuntimeError):
    """Path enumeration would exceed the configured limit."""


class MaskFlipRisk(RuntimeError):
    """A relu pre-activation is too close to zero for the finite-difference
    step, so the estimate would straddle a mask flip; re-sample the instance."""


@dataclass(frozen=True)
class AttributionQuery:
    """One (central node, target class) question, over ``hops`` neighbors.

    ``hops`` defaults to the model depth, which is the receptive field.
    """

    node: int
    target_class: int
    hops: int | None = None


@dataclass(eq=False)
class AttributionResult:
    """Contributions of every node in the K-hop neighborhood of the query.

    ``per_node`` maps node id -> contribution; nodes absent from the map
    are outside the neighborhood and contribute exactly zero.
    ``per_dimension`` holds the addends per input dimension and
    ``gradient`` the raw d(logit)/d(features) rows, for diagnostics.
    """

    query: AttributionQuery
    per_node: dict
    per_dimension: dict
    gradient: dict

    def contribution(self, node: int) -> float:
        return self.per_node.get(int(node), 0.0)

    def nodes(self) -> list:
        return sorted(self.per_node)


def _check_query(model: GcnModel, adj: NormalizedAdjacency,
                 query: AttributionQuery) -> int:
    if not 0 <= query.node < adj.num_nodes:
        raise ValueError(f"query node {query.node} out of range")
    if not 0 <= query.target_class < model.output_dim:
        raise ValueError(f"query class {query.target_class} out of range")
    hops = model.depth if query.hops is None else int(query.hops)
    if hops < 0:
        raise ValueError(f"hops must be >= 0, got {query.hops}")
    return hops


def _check_trace(model: GcnModel, adj: NormalizedAdjacency,
                 trace: ForwardTrace) -> None:
    if trace.adjacency is not adj and (
            trace.adjacency.num_nodes != adj.num_nodes
            or not np.array_equal(trace.adjacency.indptr, adj.indptr)
            or not np.array_equal(trace.adjacency.indices, adj.indices)
            or not np.array_equal(trace.adjacency.data, adj.data)):
        raise ValueError("trace was computed on a different adjacency")
    if len(trace.pre) != model.depth or any(
            z.shape[1] != layer.weight.shape[1]
            for z, layer in zip(trace.pre, model.layers)):
        raise ValueError("trace does not match the model's layer shapes")


def _closed_k_hop(adj: NormalizedAdjacency, v: int, hops: int) -> np.ndarray:
    """K-hop neighborhood of v under the self-looped adjacency (ascending)."""
    rows = np.array([v], dtype=np.int64)
    for _ in range(hops):
        rows = np.unique(np.concatenate(
            [adj.row(int(i))[0] for i in rows]))
    return rows


def _activation_grad(layer, z_rows: np.ndarray) -> np.ndarray:
    # relu derivative at exactly 0 is 0, matching the forward masks
    if layer.activation == "relu":
        return (z_rows > 0.0).astype(np.float64)
    return np.ones_like(z_rows)


@dataclass(eq=False)
class IntraLayerJacobian:
    layer_index: int
    node: int
    matrix: np.ndarray


def intra_layer_jacobian(trace: ForwardTrace, model: GcnModel,
                         layer_index: int, node: int) -> IntraLayerJacobian:
    """Jacobian of one node's layer output w.r.t. its aggregated input.

    For layer l (1-based) and node u this is ``W_l * diag(act'(z_u))``, a
    (d_{l-1}, d_l) matrix: the weight matrix with columns zeroed wherever
    the node's relu is inactive.
    """
    if not 1 <= layer_index <= model.depth:
        raise ValueError(f"layer index {layer_index} out of range 1..{model.depth}")
    if not 0 <= node < trace.adjacency.num_nodes:
        raise ValueError(f"node {node} out of range")
    layer = model.layers[layer_index - 1]
    grad = _activation_grad(layer, trace.pre[layer_index - 1][node])
    return IntraLayerJacobian(layer_index=layer_index, node=int(node),
                              matrix=layer.weight * grad[None, :])


def _pull_back_adjacency(adj: NormalizedAdjacency, rows: np.ndarray,
                         cot: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pull a cotangent (rows, d) back through the aggregation step.

    Row j of the result accumulates weight(i, j) * cot[i] over the
    supported rows i; support grows by exactly one hop.
    """
    new_rows = np.unique(np.concatenate([adj.row(int(i))[0] for i in rows]))
    out = np.zeros((len(new_rows), cot.shape[1]))
    for k, i in enumerate(rows):
        cols, vals = adj.row(int(i))
        pos = np.searchsorted(new_rows, cols)
        out[pos] += vals[:, None] * cot[k]
    return new_rows, out


def attribute(model: GcnModel, adj: NormalizedAdjacency, trace: ForwardTrace,
              query: AttributionQuery) -> AttributionResult:
    """Contributions of every K-hop neighbor to the queried logit.

    One reverse sweep: seed a one-hot cotangent at (node, class) in the
    last layer, then per layer pull back through the masked weight
    transpose and through the adjacency weights. Input weighting happens
    once, at the source: contribution[u] = sum_i x[u, i] * grad[u, i].
    """
    hops = _check_query(model, adj, query)
    _check_trace(model, adj, trace)
    v = int(query.node)

    rows = np.array([v], dtype=np.int64)
    cot = np.zeros((1, model.output_dim))
    cot[0, query.target_class] = 1.0
    for l in range(model.depth, 0, -1):
        layer = model.layers[l - 1]
        cot = cot * _activation_grad(layer, trace.pre[l - 1][rows])
        cot = cot @ layer.weight.T
        rows, cot = _pull_back_adjacency(adj, rows, cot)

    grad_rows = dict(zip(rows.tolist(), cot))
    hood = rows if hops == model.depth else _closed_k_hop(adj, v, hops)

    gradient, per_dimension, per_node = {}, {}, {}
    zero = np.zeros(model.input_dim)
    for u in hood.tolist():
        g = grad_rows.get(u, zero)
        contrib = trace.inputs[u] * g
        gradient[u] = g
        per_dimension[u] = contrib
        per_node[u] = float(contrib.sum())
    return AttributionResult(query=AttributionQuery(v, query.target_class, hops),
                             per_node=per_node, per_dimension=per_dimension,
                             gradient=gradient)


def path_enumeration_oracle(model: GcnModel, adj: NormalizedAdjacency,
                            trace: ForwardTrace, query: AttributionQuery,
                            path_limit: int = DEFAULT_PATH_LIMIT) -> AttributionResult:
    """Same contract as ``attribute``, by literally enumerating node paths.

    A path is a node sequence (u_0, ..., u_K = v) whose consecutive nodes
    are adjacent under the self-looped graph. Each complete path's factor
    product (adjacency weight times masked-weight Jacobian, per layer) is
    computed from scratch and the products are summed, so this shares no
    accumulation with the reverse sweep. Intended for small graphs: the
    path count grows like (neighborhood size)^K.
    """
    hops = _check_query(model, adj, query)
    _check_trace(model, adj, trace)
    v = int(query.node)
    depth = model.depth

    # integer path count (cheap DP) guards the enumeration
    counts = {v: 1}
    total = 1
    for _ in range(depth):
        nxt = {}
        for i, c in counts.items():
            for j in adj.row(i)[0]:
                nxt[int(j)] = nxt.get(int(j), 0) + c
        counts = nxt
        total = sum(counts.values())
        if total > path_limit:
            raise PathCountError(
                f"path count exceeds limit ({total} > {path_limit})")

    grad_acc = {}

    def descend(level: int, suffix: list) -> None:
        if level == 0:
            path = suffix[::-1]  # (u_0, ..., u_K)
            vec = np.zeros(model.output_dim)
            vec[query.target_class] = 1.0
            for l in range(depth, 0, -1):
                jac = intra_layer_jacobian(trace, model, l, path[l]).matrix
                vec = adj.entry(path[l - 1], path[l]) * (jac @ vec)
            u0 = path[0]
            if u0 in grad_acc:
                grad_acc[u0] = grad_acc[u0] + vec
            else:
                grad_acc[u0] = vec
            return
        for j in adj.row(suffix[-1])[0]:
            descend(level - 1, suffix + [int(j)])

    descend(depth, [v])

    hood = _closed_k_hop(adj, v, hops)
    gradient, per_dimension, per_node = {}, {}, {}
    zero = np.zeros(model.input_dim)
    for u in hood.tolist():
        g = grad_acc.get(u, zero)
        contrib = trace.inputs[u] * g
        gradient[u] = g
        per_dimension[u] = contrib
        per_node[u] = float(contrib.sum())
    return AttributionResult(query=AttributionQuery(v, query.target_class, hops),
                             per_node=per_node, per_dimension=per_dimension,
                             gradient=gradient)


def finite_difference_gradient(model: GcnModel, adj: NormalizedAdjacency,
                               features: np.ndarray, v: int, target_class: int,
                               node: int, step: float = 1e-6) -> np.ndarray:
    """Central-difference estimate of d(logit_c(v))/d(features of node).

    Valid only while no relu mask can flip under the +-step perturbation;
    when any pre-activation magnitude is below 10 * step this raises
    MaskFlipRisk and the caller should re-sample the instance.
    """
    if step <= 0:
        raise ValueError(f"step must be positive, got {step}")
    _check_query(model, adj, AttributionQuery(v, target_class))
    if not 0 <= node < adj.num_nodes:
        raise ValueError(f"node {node} out of range")

    base = forward(model, adj, features)
    for layer, z in zip(model.layers, base.pre):
        if layer.activation == "relu" and z.size:
            margin = float(np.min(np.abs(z)))
            if margin < 10.0 * step:
                raise MaskFlipRisk(
                    f"relu pre-activation margin {margin:.3e} < 10 * step")

    dim = features.shape[1]
    grad = np.zeros(dim)
    for i in range(dim):
        bumped = features.copy()
        bumped[node, i] += step
        hi = forward(model, adj, bumped).logits[v, target_class]
        bumped[node, i] -= 2.0 * step
        lo = forward(model, adj, bumped).logits[v, target_class]
        grad[i] = (hi - lo) / (2.0 * step)
    if not np.all(np.isfinite(grad)):
        raise ArithmeticError("non-finite finite-difference gradient")
    return grad


def rank_nodes(result: AttributionResult, order: str = "signed_desc",
               exclude_central: bool = False) -> list:
    """Neighbor ids sorted by contribution; ties break toward lower ids."""
    if order not in RANK_ORDERS:
        raise ValueError(f"order must be one of {RANK_ORDERS}, got {order!r}")
    items = [(u, c) for u, c in result.per_node.items()
             if not (exclude_central and u == result.query.node)]
    key = (lambda uc: (-uc[1], uc[0])) if order == "signed_desc" \
        else (lambda uc: (-abs(uc[1]), uc[0]))
    return [u for u, _ in sorted(items, key=key)]


def result_to_json(result: AttributionResult,
                   include_gradients: bool = False) -> str:
    """Serialize a result to the documented JSON shape."""
    doc = {
        "node": result.query.node,
        "class": result.query.target_class,
        "hops": result.query.hops,
        "contributions": [{"node": u, "value": result.per_node[u]}
                          for u in result.nodes()],
    }
    if include_gradients:
        doc["gradients"] = {str(u): result.gradient[u].tolist()
                            for u in result.nodes()}
    return json.dumps(doc, indent=2) + "\n"


def result_from_json(text: str) -> AttributionResult:
    """Parse the JSON shape back; per-dimension detail is not serialized."""
    doc = json.loads(text)
    try:
        query = AttributionQuery(int(doc["node"]), int(doc["class"]),
                                 int(doc["hops"]))
        per_node = {int(e["node"]): float(e["value"])
                    for e in doc["contributions"]}
    except (KeyError, TypeError) as exc:
        raise ValueError(f"malformed attribution JSON: {exc}") from None
    gradient = {int(u): np.array(g, dtype=np.float64)
                for u, g in doc.get("gradients", {}).items()}
    return AttributionResult(query=query, per_node=per_node,
                             per_dimension={}, gradient=gradient)
