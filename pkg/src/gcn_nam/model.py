"""K-layer GCN: forward propagation with a full trace, training, checkpoints.

Each layer computes ``H_l = act(adj @ H_{l-1} @ W_l + b_l)``: first the
row-wise neighborhood aggregation through the normalized adjacency, then
a shared affine map over feature dimensions. The final layer is always
linear so its outputs are class logits.

Training is full-batch gradient descent with Adam (beta1 0.9, beta2
0.999, eps 1e-8), softmax cross-entropy over the training split, L2
weight decay on the weight matrices, inverted dropout on the layer
inputs, and early stopping on validation accuracy (the best-validation
weights are restored). The backward pass is derived by hand for the
fixed two-layer architecture. All randomness comes from one seeded PCG64
stream, so runs reproduce bit-identically.
"""

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .data import NodeDataset
from .graph import NormalizedAdjacency, build_normalized_adjacency

ACTIVATIONS = ("relu", "linear")

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_MAGIC = "gcn-checkpoint 1"


class CheckpointError(ValueError):
    """Malformed or truncated checkpoint file."""


class TrainingDivergedError(RuntimeError):
    """Non-finite training loss."""


@dataclass(eq=False)
class GcnLayer:
    weight: np.ndarray   # (d_in, d_out)
    bias: np.ndarray     # (d_out,)
    activation: str

    def __post_init__(self):
        self.weight = np.ascontiguousarray(self.weight, dtype=np.float64)
        self.bias = np.ascontiguousarray(self.bias, dtype=np.float64)
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[1],):
            raise ValueError("layer weight must be (d_in, d_out) with a matching bias")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")


@dataclass(eq=False)
class GcnModel:
    layers: tuple

    def __post_init__(self):
        self.layers = tuple(self.layers)
        if not self.layers:
            raise ValueError("model needs at least one layer")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.weight.shape[1] != b.weight.shape[0]:
                raise ValueError("adjacent layer dimensions do not chain")
        if self.layers[-1].activation != "linear":
            raise ValueError("final layer must be linear (logits)")

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def input_dim(self) -> int:
        return self.layers[0].weight.shape[0]

    @property
    def output_dim(self) -> int:
        return self.layers[-1].weight.shape[1]


@dataclass(eq=False)
class ForwardTrace:
    """Every intermediate of one deterministic forward pass.

    ``fused[l]`` is the aggregated input adj @ H_l, ``pre[l]`` the
    pre-activation, ``act[l]`` the activation output, for layer l
    (0-based). ``inputs`` is H_0.
    """

    inputs: np.ndarray
    fused: tuple
    pre: tuple
    act: tuple
    adjacency: NormalizedAdjacency

    @property
    def logits(self) -> np.ndarray:
        return self.act[-1]


def forward(model: GcnModel, adj: NormalizedAdjacency,
            features: np.ndarray) -> ForwardTrace:
    """Deterministic forward pass recording all intermediates (no dropout)."""
    features = np.ascontiguousarray(features, dtype=np.float64)
    if features.shape != (adj.num_nodes, model.input_dim):
        raise ValueError(
            f"features shape {features.shape} does not match "
            f"({adj.num_nodes}, {model.input_dim})")
    h = features
    fused, pre, act = [], [], []
    for layer in model.layers:
        f = adj.matmul(h)
        z = f @ layer.weight + layer.bias
        h = np.maximum(z, 0.0) if layer.activation == "relu" else z
        fused.append(f)
        pre.append(z)
        act.append(h)
    return ForwardTrace(inputs=features, fused=tuple(fused), pre=tuple(pre),
                        act=tuple(act), adjacency=adj)


def predict(trace: ForwardTrace) -> np.ndarray:
    """Per-node argmax of the logits; ties go to the lowest class id."""
    return np.argmax(trace.logits, axis=1).astype(np.int64)


@dataclass
class TrainConfig:
    hidden_dim: int = 16
    epochs: int = 200
    learning_rate: float = 0.01
    weight_decay: float = 5e-4
    dropout_rate: float = 0.5
    seed: int = 0
    patience: int = 10

    def __post_init__(self):
        if self.hidden_dim <= 0 or self.epochs <= 0 or self.patience <= 0:
            raise ValueError("hidden_dim, epochs and patience must be positive")
        if self.learning_rate <= 0 or self.weight_decay < 0:
            raise ValueError("learning_rate must be > 0 and weight_decay >= 0")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")


def _glorot(rng: np.random.Generator, d_in: int, d_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (d_in + d_out))
    return rng.uniform(-limit, limit, (d_in, d_out))


def _accuracy(logits: np.ndarray, labels: np.ndarray, idx: np.ndarray) -> float:
    if not len(idx):
        return 0.0
    return float(np.mean(np.argmax(logits[idx], axis=1) == labels[idx]))


def train(dataset: NodeDataset, config: TrainConfig, log=None) -> GcnModel:
    """Train a two-layer GCN (relu, linear) on the training split.

    Writes one ``epoch<TAB>train_loss<TAB>val_acc`` line per epoch to
    ``log`` when given a writable text stream. Deterministic for a fixed
    config.
    """
    rng = np.random.default_rng(np.random.PCG64(config.seed))
    adj = build_normalized_adjacency(dataset.graph)
    x = dataset.features
    labels = dataset.labels
    train_idx, val_idx = dataset.train_nodes, dataset.val_nodes
    if not len(train_idx):
        raise ValueError("training split is empty")

    d_in, d_hid, d_out = dataset.num_features, config.hidden_dim, dataset.num_classes
    w1 = _glorot(rng, d_in, d_hid)
    b1 = np.zeros(d_hid)
    w2 = _glorot(rng, d_hid, d_out)
    b2 = np.zeros(d_out)

    params = [w1, b1, w2, b2]
    m_state = [np.zeros_like(p) for p in params]
    v_state = [np.zeros_like(p) for p in params]

    ax = adj.matmul(x)  # aggregation of the fixed inputs, reused for eval
    n_train = len(train_idx)
    onehot = np.zeros((n_train, d_out))
    onehot[np.arange(n_train), labels[train_idx]] = 1.0

    keep = 1.0 - config.dropout_rate
    best = None
    best_val = -1.0
    wait = 0

    for epoch in range(1, config.epochs + 1):
        # forward with inverted dropout on each layer input
        if config.dropout_rate > 0.0:
            x_drop = x * (rng.random(x.shape) < keep) / keep
            f1 = adj.matmul(x_drop)
        else:
            f1 = ax
        z1 = f1 @ w1 + b1
        h1 = np.maximum(z1, 0.0)
        if config.dropout_rate > 0.0:
            mask1 = (rng.random(h1.shape) < keep) / keep
            h1_drop = h1 * mask1
        else:
            mask1 = None
            h1_drop = h1
        f2 = adj.matmul(h1_drop)
        z2 = f2 @ w2 + b2

        zt = z2[train_idx]
        zt_shift = zt - zt.max(axis=1, keepdims=True)
        log_probs = zt_shift - np.log(np.exp(zt_shift).sum(axis=1, keepdims=True))
        loss = float(-np.mean(log_probs[np.arange(n_train), labels[train_idx]]))
        if not np.isfinite(loss):
            raise TrainingDivergedError(
                f"non-finite training loss at epoch {epoch}")

        # backward (hand-derived for the 2-layer stack)
        g2 = np.zeros_like(z2)
        g2[train_idx] = (np.exp(log_probs) - onehot) / n_train
        dw2 = f2.T @ g2 + config.weight_decay * w2
        db2 = g2.sum(axis=0)
        gh1 = adj.matmul(g2 @ w2.T)  # adj is symmetric
        if mask1 is not None:
            gh1 = gh1 * mask1
        gz1 = gh1 * (z1 > 0.0)
        dw1 = f1.T @ gz1 + config.weight_decay * w1
        db1 = gz1.sum(axis=0)

        t = epoch
        for p, g, ms, vs in zip(params, [dw1, db1, dw2, db2], m_state, v_state):
            ms *= ADAM_BETA1
            ms += (1.0 - ADAM_BETA1) * g
            vs *= ADAM_BETA2
            vs += (1.0 - ADAM_BETA2) * g * g
            m_hat = ms / (1.0 - ADAM_BETA1 ** t)
            v_hat = vs / (1.0 - ADAM_BETA2 ** t)
            p -= config.learning_rate * m_hat / (np.sqrt(v_hat) + ADAM_EPS)

        # deterministic evaluation pass for early stopping
        h1_eval = np.maximum(ax @ w1 + b1, 0.0)
        logits_eval = adj.matmul(h1_eval) @ w2 + b2
        val_acc = _accuracy(logits_eval, labels, val_idx)
        if log is not None:
            log.write(f"{epoch}\t{loss:.6f}\t{val_acc:.4f}\n")

        if len(val_idx):  # no validation split disables early stopping
            if val_acc > best_val:
                best_val = val_acc
                best = [p.copy() for p in params]
                wait = 0
            else:
                wait += 1
                if wait >= config.patience:
                    break

    if best is not None:
        w1, b1, w2, b2 = best
    return GcnModel(layers=(GcnLayer(w1, b1, "relu"),
                            GcnLayer(w2, b2, "linear")))


def model_to_text(model: GcnModel) -> str:
    """Checkpoint text: a header plus rows of decimal floats (17 significant
    digits, so the round trip is bit-exact for 64-bit values)."""
    lines = [CHECKPOINT_MAGIC, f"layers {model.depth}"]
    for i, layer in enumerate(model.layers):
        d_in, d_out = layer.weight.shape
        lines.append(f"layer {i} {layer.activation} {d_in} {d_out}")
        for row in layer.weight:
            lines.append(" ".join(f"{x:.17g}" for x in row))
        lines.append(" ".join(f"{x:.17g}" for x in layer.bias))
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> GcnModel:
    lines = text.splitlines()
    pos = 0

    def next_line(what: str) -> str:
        nonlocal pos
        if pos >= len(lines):
            raise CheckpointError(f"truncated checkpoint: expected {what}")
        line = lines[pos]
        pos += 1
        return line

    if next_line("header") != CHECKPOINT_MAGIC:
        raise CheckpointError(f"not a checkpoint (expected {CHECKPOINT_MAGIC!r})")
    parts = next_line("layer count").split()
    if len(parts) != 2 or parts[0] != "layers" or not parts[1].isdigit():
        raise CheckpointError("malformed layer count line")
    depth = int(parts[1])

    def parse_row(d_out: int, what: str) -> np.ndarray:
        tokens = next_line(what).split()
        if len(tokens) != d_out:
            raise CheckpointError(
                f"line {pos}: expected {d_out} values for {what}, got {len(tokens)}")
        try:
            return np.array([float(t) for t in tokens])
        except ValueError:
            raise CheckpointError(f"line {pos}: non-numeric value in {what}") from None

    layers = []
    for i in range(depth):
        parts = next_line(f"layer {i} header").split()
        if (len(parts) != 5 or parts[0] != "layer" or parts[1] != str(i)
                or parts[2] not in ACTIVATIONS
                or not parts[3].isdigit() or not parts[4].isdigit()):
            raise CheckpointError(f"line {pos}: malformed layer header")
        activation, d_in, d_out = parts[2], int(parts[3]), int(parts[4])
        if d_in <= 0 or d_out <= 0:
            raise CheckpointError(f"line {pos}: layer dims must be positive")
        weight = np.stack([parse_row(d_out, f"layer {i} weight row")
                           for _ in range(d_in)])
        bias = parse_row(d_out, f"layer {i} bias")
        layers.append(GcnLayer(weight, bias, activation))
    if pos != len(lines) and any(l.strip() for l in lines[pos:]):
        raise CheckpointError(f"line {pos + 1}: trailing content after layers")
    try:
        return GcnModel(layers=tuple(layers))
    except ValueError as exc:
        raise CheckpointError(f"inconsistent checkpoint: {exc}") from None


def save_model(model: GcnModel, path) -> None:
    Path(path).write_text(model_to_text(model), encoding="utf-8")


def load_model(path) -> GcnModel:
    p = Path(path)
    if not p.is_file():
        raise CheckpointError(f"missing checkpoint file: {p}")
    return model_from_text(p.read_text(encoding="utf-8"))


def model_checksum(model: GcnModel) -> str:
    """Stable hex digest of the exact checkpoint bytes."""
    return hashlib.sha256(model_to_text(model).encode("utf-8")).hexdigest()
