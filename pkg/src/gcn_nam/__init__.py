"""GCN node-attribution toolkit.

Train a small graph convolutional network, attribute any node's
classification to the nodes in its receptive field, validate the
attributions with a neighbor-deletion harness, and export node
importance visualizations.
"""

from .attribution import (
    AttributionQuery,
    AttributionResult,
    IntraLayerJacobian,
    MaskFlipRisk,
    PathCountError,
    attribute,
    finite_difference_gradient,
    intra_layer_jacobian,
    path_enumeration_oracle,
    rank_nodes,
    result_from_json,
    result_to_json,
)
from .data import DatasetError, NodeDataset, generate_synthetic, load_dataset, save_dataset
from .graph import (
    GraphError,
    NormalizedAdjacency,
    SparseGraph,
    build_normalized_adjacency,
    k_hop_neighborhood,
    remove_nodes,
)
from .model import (
    CheckpointError,
    ForwardTrace,
    GcnLayer,
    GcnModel,
    TrainConfig,
    TrainingDivergedError,
    forward,
    load_model,
    model_checksum,
    predict,
    save_model,
    train,
)
from .niv import NivDocument, NivNode, build_niv, emit_dot, emit_json, parse_json
from .perturb import (
    PerturbationConfig,
    PerturbationCurve,
    deletion_set,
    read_curves_json,
    run_perturbation,
    write_curves_json,
    write_curves_tsv,
)

__version__ = "0.1.0"
