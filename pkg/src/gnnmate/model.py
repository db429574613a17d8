"""Three-layer GCN with node and graph classification heads.

The node head classifies from the concatenation of all three hidden layers;
the graph head from concatenated max- and mean-pooling of the last layer.
Adjacency normalization accepts either a raw 0/1 matrix or a tape-attached
masked adjacency, so explainer gradients flow through the normalization.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ContractError, IngestionError, ShapeError

CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    in_dim: int
    n_classes: int
    hidden: int = 20
    task: str = "node"  # "node" | "graph"

    def to_dict(self):
        return {"in_dim": self.in_dim, "n_classes": self.n_classes, "hidden": self.hidden, "task": self.task}

    @classmethod
    def from_dict(cls, d):
        return cls(**d)


@dataclass
class ModelParams:
    """Ordered trainable weights: three conv layers plus the classification head."""

    config: ModelConfig
    conv_weights: list = field(default_factory=list)
    conv_biases: list = field(default_factory=list)
    head_weight: Tensor = None
    head_bias: Tensor = None

    def tensors(self):
        out = []
        for w, b in zip(self.conv_weights, self.conv_biases):
            out.extend([w, b])
        out.extend([self.head_weight, self.head_bias])
        return out

    def with_tensors(self, flat):
        if len(flat) != 2 * len(self.conv_weights) + 2:
            raise ShapeError(f"expected {2 * len(self.conv_weights) + 2} tensors, got {len(flat)}")
        p = ModelParams(config=self.config)
        for i in range(len(self.conv_weights)):
            p.conv_weights.append(flat[2 * i])
            p.conv_biases.append(flat[2 * i + 1])
        p.head_weight, p.head_bias = flat[-2], flat[-1]
        return p

    def detached(self):
        return self.with_tensors([t.detach() for t in self.tensors()])

    def copy_values(self):
        return [t.values.copy() for t in self.tensors()]


def init_params(config, seed):
    """Glorot-uniform weights, zero biases, deterministic per seed."""
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x61]))
    h, c = config.hidden, config.n_classes
    dims = [(config.in_dim, h), (h, h), (h, h)]
    head_in = 3 * h if config.task == "node" else 2 * h
    p = ModelParams(config=config)

    def glorot(fan_in, fan_out):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        return Tensor(rng.uniform(-limit, limit, size=(fan_in, fan_out)), requires_grad=True)

    for d_in, d_out in dims:
        p.conv_weights.append(glorot(d_in, d_out))
        p.conv_biases.append(Tensor(np.zeros((1, d_out)), requires_grad=True))
    p.head_weight = glorot(head_in, c)
    p.head_bias = Tensor(np.zeros((1, c)), requires_grad=True)
    return p


@dataclass
class DiffusionOperator:
    """Symmetrically normalized dense propagation matrix for A plus self-loops."""

    matrix: Tensor

    @property
    def n(self):
        return self.matrix.shape[0]


def normalize_adjacency(adjacency, degrees=None):
    """D^{-1/2} (A + I) D^{-1/2} with D the degree matrix of A + I.

    Accepts a plain 0/1 matrix (fast constant path) or a tape-attached masked
    adjacency with entries in [0, 1]. ``degrees`` overrides the self-loop
    degree vector, which lets an extracted subgraph keep its full-graph
    normalization.
    """
    if isinstance(adjacency, Tensor):
        a = adjacency
        if (a.values < 0).any():
            raise ContractError("adjacency has negative entries")
        n = a.shape[0]
        deg = ad.add(ad.tensor_sum(a, axis=1, keepdims=True), 1.0)
        inv_sqrt = ad.div(1.0, ad.sqrt(deg))
        a_loops = ad.add(a, Tensor(np.eye(n)))
        d = ad.mul(ad.mul(a_loops, inv_sqrt), ad.transpose(inv_sqrt))
        return DiffusionOperator(matrix=d)
    a = np.asarray(adjacency, dtype=np.float64)
    if (a < 0).any():
        raise ContractError("adjacency has negative entries")
    deg = a.sum(axis=1) + 1.0 if degrees is None else np.asarray(degrees, dtype=np.float64)
    s = 1.0 / np.sqrt(deg)
    d = (a + np.eye(a.shape[0])) * s[:, None] * s[None, :]
    return DiffusionOperator(matrix=Tensor(d))


def subgraph_operator(subgraph):
    """Diffusion operator for a computational subgraph using full-graph degrees."""
    return normalize_adjacency(subgraph.adjacency, degrees=subgraph.degrees)


def gcn_layer(operator, hidden, weight, bias=None, apply_relu=True):
    """One propagation step: phi(D @ H @ W + b)."""
    d = operator.matrix if isinstance(operator, DiffusionOperator) else operator
    out = ad.matmul(d, ad.matmul(hidden, weight))
    if bias is not None:
        out = ad.add(out, bias)
    return ad.relu(out) if apply_relu else out


def _as_operator(adjacency):
    if isinstance(adjacency, DiffusionOperator):
        return adjacency
    return normalize_adjacency(adjacency)


def _hidden_stack(x, op, params):
    hs = []
    h = x if isinstance(x, Tensor) else Tensor(x)
    for w, b in zip(params.conv_weights, params.conv_biases):
        h = gcn_layer(op, h, w, b)
        hs.append(h)
    return hs


def node_model_forward(features, adjacency, params):
    """Per-node class probabilities, shape (n, C); rows sum to 1."""
    op = _as_operator(adjacency)
    hs = _hidden_stack(features, op, params)
    logits = ad.add(ad.matmul(ad.concat(hs, axis=1), params.head_weight), params.head_bias)
    return ad.softmax(logits)


def graph_model_forward(features, adjacency, params):
    """Whole-graph class probabilities, shape (1, C)."""
    op = _as_operator(adjacency)
    if op.n == 0:
        raise ContractError("graph model forward on an empty graph")
    hs = _hidden_stack(features, op, params)
    h_last = hs[-1]
    pooled = ad.concat([ad.max_over_rows(h_last), ad.tensor_mean(h_last, axis=0, keepdims=True)], axis=1)
    logits = ad.add(ad.matmul(pooled, params.head_weight), params.head_bias)
    return ad.softmax(logits)


@dataclass
class GraphBatchCache:
    """Precomputed constants for full-batch graph classification."""

    features: Tensor
    blocks: list
    counts: np.ndarray

    @classmethod
    def build(cls, graphs):
        blocks = [normalize_adjacency(g.adjacency).matrix.values for g in graphs]
        counts = np.array([g.n_nodes for g in graphs], dtype=np.intp)
        if counts.size and (counts == counts[0]).all():
            blocks = np.stack(blocks)  # uniform sizes run as one 3-D matmul
        feats = Tensor(np.concatenate([g.node_features for g in graphs], axis=0))
        return cls(features=feats, blocks=blocks, counts=counts)


def graph_batch_forward(cache, params, member_ids=None):
    """Class probabilities for every graph in the batch, shape (G, C)."""
    if member_ids is None:
        feats, blocks, counts = cache.features, cache.blocks, cache.counts
    else:
        member_ids = np.asarray(member_ids, dtype=np.intp)
        bounds = np.concatenate([[0], np.cumsum(cache.counts)])
        rows = np.concatenate([np.arange(bounds[i], bounds[i + 1]) for i in member_ids])
        feats = Tensor(cache.features.values[rows])
        if isinstance(cache.blocks, np.ndarray):
            blocks = cache.blocks[member_ids]
        else:
            blocks = [cache.blocks[i] for i in member_ids]
        counts = cache.counts[member_ids]
    h = feats
    for w, b in zip(params.conv_weights, params.conv_biases):
        h = ad.relu(ad.add(ad.block_diag_matmul(blocks, ad.matmul(h, w), counts), b))
    pooled = ad.concat([ad.segment_max_rows(h, counts), ad.segment_mean_rows(h, counts)], axis=1)
    logits = ad.add(ad.matmul(pooled, params.head_weight), params.head_bias)
    return ad.softmax(logits)


def _ring(support, seeds, hops):
    reach = np.zeros(support.shape[0], dtype=bool)
    reach[seeds] = True
    frontier = reach.copy()
    for _ in range(hops):
        frontier = support[frontier].any(axis=0) & ~reach
        if not frontier.any():
            break
        reach |= frontier
    return np.flatnonzero(reach)


def masked_center_forward(features, adjacency, support, params, center):
    """Center-node class probabilities (1, C) computed on sliced layers.

    ``support`` is the 0/1 structure of the (sub)graph adjacency; only the
    rows a layer actually feeds into the center's prediction are computed,
    which matches the full forward at the center exactly.
    """
    op = _as_operator(adjacency)
    support = support.astype(bool)
    s1 = _ring(support, [center], 1)
    s2 = _ring(support, [center], 2)
    c_in_s1 = int(np.searchsorted(s1, center))
    c_in_s2 = int(np.searchsorted(s2, center))
    d = op.matrix
    x = features if isinstance(features, Tensor) else Tensor(features)
    w, b = params.conv_weights, params.conv_biases
    h1 = ad.relu(ad.add(ad.matmul(ad.submatrix(d, s2), ad.matmul(x, w[0])), b[0]))
    h2 = ad.relu(ad.add(ad.matmul(ad.submatrix(d, s1, s2), ad.matmul(h1, w[1])), b[1]))
    h3 = ad.relu(ad.add(ad.matmul(ad.submatrix(d, [center], s1), ad.matmul(h2, w[2])), b[2]))
    parts = [ad.slice_rows(h1, [c_in_s2]), ad.slice_rows(h2, [c_in_s1]), h3]
    logits = ad.add(ad.matmul(ad.concat(parts, axis=1), params.head_weight), params.head_bias)
    return ad.softmax(logits)


def task_loss(predictions, labels, mask):
    """Mean negative log-probability of the true class over masked entities."""
    labels = np.asarray(labels)
    if mask is None:
        idx = np.arange(predictions.shape[0], dtype=np.intp)
    else:
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(np.intp)
    if idx.size == 0:
        raise ContractError("task loss over an empty mask")
    n_classes = predictions.shape[1]
    onehot = np.zeros((idx.size, n_classes))
    onehot[np.arange(idx.size), labels[idx]] = 1.0
    selected = ad.slice_rows(predictions, idx)
    p_true = ad.tensor_sum(ad.mul(selected, Tensor(onehot)), axis=1, keepdims=True)
    return ad.mul(ad.tensor_sum(ad.log(p_true)), -1.0 / idx.size)


def accuracy(prob_values, labels, mask=None):
    labels = np.asarray(labels)
    pred = np.argmax(prob_values, axis=1)
    if mask is not None:
        mask = np.asarray(mask)
        idx = np.flatnonzero(mask) if mask.dtype == bool else mask.astype(np.intp)
        return float(np.mean(pred[idx] == labels[idx]))
    return float(np.mean(pred == labels))


# ---------------------------------------------------------------------------
# checkpoints


def _weight_names(params):
    names = []
    for i in range(len(params.conv_weights)):
        names.extend([f"conv{i + 1}.weight", f"conv{i + 1}.bias"])
    names.extend(["head.weight", "head.bias"])
    return names


def save_checkpoint(params, path):
    doc = {"format_version": CHECKPOINT_VERSION, "model_config": params.config.to_dict(), "weights": {}}
    for name, t in zip(_weight_names(params), params.tensors()):
        doc["weights"][name] = {"shape": list(t.shape), "data": t.values.ravel().tolist()}
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path


def load_checkpoint(path):
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise IngestionError("checkpoint not found", filename=str(path)) from None
    if doc.get("format_version") != CHECKPOINT_VERSION:
        raise IngestionError(f"unsupported checkpoint version {doc.get('format_version')!r}", filename=str(path))
    config = ModelConfig.from_dict(doc["model_config"])
    params = init_params(config, seed=0)
    flat = []
    for name in _weight_names(params):
        entry = doc["weights"].get(name)
        if entry is None:
            raise IngestionError(f"checkpoint missing weight {name}", filename=str(path))
        arr = np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        flat.append(Tensor(arr, requires_grad=True))
    return params.with_tensors(flat)
