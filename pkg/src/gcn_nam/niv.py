"""Node importance visualization: the local subgraph around a central node,
node size encoding contribution magnitude and fill color the predicted class.

Documents render to DOT text (layout left to the renderer) and to a
lossless JSON form. Sign is shown with the border style, solid for
positive and dashed for negative, since size carries magnitude only.
"""

import json
from dataclasses import dataclass

import numpy as np

from .graph import SparseGraph, k_hop_neighborhood

CLASS_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)

DEFAULT_SIZE_MIN = 0.3
DEFAULT_SIZE_MAX = 2.0


@dataclass(frozen=True)
class NivNode:
    id: int
    contribution: float
    predicted_class: int
    size: float
    hop_distance: int


@dataclass(frozen=True)
class NivDocument:
    central_node: int
    nodes: tuple
    edges: tuple
    palette: tuple

    def node_ids(self) -> list:
        return [n.id for n in self.nodes]


def class_color(palette, class_id: int) -> str:
    return palette[class_id % len(palette)]


def build_niv(result, predictions, graph: SparseGraph, hops: int = 1,
              size_min: float = DEFAULT_SIZE_MIN,
              size_max: float = DEFAULT_SIZE_MAX) -> NivDocument:
    """Build the renderable document for one attribution result.

    Sizes map |contribution| linearly onto [size_min, size_max]; when all
    magnitudes are equal every node sits at the midpoint. The node set is
    exactly the ``hops``-neighborhood of the central node, so the result
    must cover it.
    """
    if size_min <= 0 or size_max < size_min:
        raise ValueError("need 0 < size_min <= size_max")
    v = result.query.node
    hood = k_hop_neighborhood(graph, v, hops)
    missing = [int(u) for u in hood if int(u) not in result.per_node]
    if missing:
        raise ValueError(
            f"attribution result does not cover nodes {missing} at {hops} hops")

    mags = np.array([abs(result.per_node[int(u)]) for u in hood])
    lo, hi = float(mags.min()), float(mags.max())
    mid = 0.5 * (size_min + size_max)

    hop_of = {int(u): 0 for u in [v]}
    for h in range(1, hops + 1):
        for u in k_hop_neighborhood(graph, v, h):
            hop_of.setdefault(int(u), h)

    nodes = []
    for u, mag in zip(hood.tolist(), mags):
        size = mid if hi == lo else \
            size_min + (size_max - size_min) * (mag - lo) / (hi - lo)
        nodes.append(NivNode(
            id=u, contribution=result.per_node[u],
            predicted_class=int(predictions[u]), size=float(size),
            hop_distance=hop_of[u]))

    in_hood = set(hood.tolist())
    edges = tuple((int(a), int(b)) for a, b in graph.edges
                  if int(a) in in_hood and int(b) in in_hood)
    return NivDocument(central_node=int(v), nodes=tuple(nodes), edges=edges,
                       palette=CLASS_PALETTE)


def emit_dot(doc: NivDocument) -> str:
    """Deterministic DOT text; nodes in ascending id order.

    Width/height come from the size, fillcolor from the predicted class,
    the central node gets a double border, negative contributions a
    dashed one.
    """
    lines = [
        "graph node_importance {",
        "  node [shape=circle, fixedsize=true, fontsize=10];",
    ]
    for node in sorted(doc.nodes, key=lambda n: n.id):
        border = "solid" if node.contribution >= 0 else "dashed"
        peripheries = 2 if node.id == doc.central_node else 1
        color = class_color(doc.palette, node.predicted_class)
        lines.append(
            f'  n{node.id} [label="{node.id}", width={node.size:.4f}, '
            f'height={node.size:.4f}, style="filled,{border}", '
            f'fillcolor="{color}", peripheries={peripheries}];')
    for a, b in sorted(doc.edges):
        lines.append(f"  n{a} -- n{b};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def emit_json(doc: NivDocument) -> str:
    payload = {
        "central_node": doc.central_node,
        "nodes": [{
            "id": n.id,
            "contribution": n.contribution,
            "predicted_class": n.predicted_class,
            "size": n.size,
            "hop_distance": n.hop_distance,
        } for n in sorted(doc.nodes, key=lambda n: n.id)],
        "edges": [list(e) for e in sorted(doc.edges)],
        "palette": list(doc.palette),
    }
    return json.dumps(payload, indent=2) + "\n"


def parse_json(text: str) -> NivDocument:
    payload = json.loads(text)
    try:
        nodes = tuple(NivNode(
            id=int(n["id"]), contribution=float(n["contribution"]),
            predicted_class=int(n["predicted_class"]), size=float(n["size"]),
            hop_distance=int(n["hop_distance"])) for n in payload["nodes"])
        return NivDocument(
            central_node=int(payload["central_node"]), nodes=nodes,
            edges=tuple((int(a), int(b)) for a, b in payload["edges"]),
            palette=tuple(payload["palette"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed visualization JSON: {exc}") from None
