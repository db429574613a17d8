"""Instance-level edge/feature mask explainer fitted by gradient descent.

Masks are real-valued parameters squashed through a sigmoid and multiplied
into the computational subgraph; fitting minimizes the cross-entropy of the
masked prediction toward the model's original predicted class, plus a size
penalty (sum of mask values) and an elementwise binary-entropy penalty that
pushes mask values toward 0 or 1. Symmetric adjacency entries share one
parameter per undirected edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .datasets import ComputationalSubgraph
from .errors import ContractError
from .model import graph_model_forward, masked_center_forward, normalize_adjacency

_ENT_EPS = 1e-12
DEFAULT_SIZE_COEF = 0.005
DEFAULT_ENTROPY_COEF = 1.0
DEFAULT_STEPS = 30
DEFAULT_STEP_SIZE = 0.03
FEATURE_MASK_INIT_STD = 0.1


@dataclass
class ExplainerMasks:
    """Trainable masks over one computational subgraph."""

    edge_pairs: np.ndarray  # (m, 2) local undirected edges
    edge_params: Tensor
    feat_params: Tensor | None
    size_coef: float = DEFAULT_SIZE_COEF
    entropy_coef: float = DEFAULT_ENTROPY_COEF

    def parameters(self):
        return [self.edge_params] if self.feat_params is None else [self.edge_params, self.feat_params]


@dataclass
class Explanation:
    """Fitted masks for one prediction, mapped back to global node ids."""

    center: int | None
    target_class: int
    node_ids: np.ndarray
    edge_pairs: np.ndarray  # (m, 2) global undirected edges
    edge_importance: np.ndarray
    feature_importance: np.ndarray | None
    loss_curve: list
    masks: ExplainerMasks | None = None

    @property
    def final_loss(self):
        return self.loss_curve[-1]

    @property
    def initial_loss(self):
        return self.loss_curve[0]


def _subject_pairs(subject):
    return np.asarray(subject.undirected_edges(), dtype=np.intp).reshape(-1, 2)


def init_masks(subject, seed, feature_masking=False, size_coef=DEFAULT_SIZE_COEF, entropy_coef=DEFAULT_ENTROPY_COEF):
    """Random masks for a subgraph (or whole graph), deterministic per seed.

    Edge parameters are normal with std sqrt(2 / (2 n)) so initial sigmoids
    concentrate near 0.5.
    """
    n = subject.adjacency.shape[0]
    if n == 0:
        raise ContractError("cannot build masks for an empty subgraph")
    pairs = _subject_pairs(subject)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xEDCE]))
    std = np.sqrt(2.0 / (2.0 * n))
    edge_params = Tensor(rng.normal(0.0, std, size=pairs.shape[0]), requires_grad=True)
    feat_params = None
    if feature_masking:
        d = subject.node_features.shape[1]
        feat_params = Tensor(rng.normal(0.0, FEATURE_MASK_INIT_STD, size=d), requires_grad=True)
    return ExplainerMasks(
        edge_pairs=pairs,
        edge_params=edge_params,
        feat_params=feat_params,
        size_coef=size_coef,
        entropy_coef=entropy_coef,
    )


def apply_masks(subject, masks):
    """Masked subgraph (X_e, A_e): pairwise products with sigmoid masks.

    Both outputs stay differentiable with respect to the mask parameters.
    Edges absent from the subgraph cannot be created, since parameters exist
    only on its edge support.
    """
    n = subject.adjacency.shape[0]
    pairs = masks.edge_pairs
    if pairs.size and (pairs.max() >= n or not subject.adjacency[pairs[:, 0], pairs[:, 1]].all()):
        raise ContractError("masks were built for a different subgraph")
    a_e = ad.edges_to_matrix(ad.sigmoid(masks.edge_params), pairs, n)
    if masks.feat_params is None:
        x_e = Tensor(subject.node_features)
    else:
        d = subject.node_features.shape[1]
        row = ad.reshape(ad.sigmoid(masks.feat_params), (1, d))
        x_e = ad.mul(Tensor(subject.node_features), row)
    return x_e, a_e


def _binary_entropy_mean(p):
    one_minus = ad.sub(1.0, p)
    ent = ad.neg(
        ad.add(
            ad.mul(p, ad.log(ad.add(p, _ENT_EPS))),
            ad.mul(one_minus, ad.log(ad.add(one_minus, _ENT_EPS))),
        )
    )
    return ad.tensor_mean(ent)


def _masked_prediction(model_params, subject, x_e, a_e):
    if model_params.config.task == "node":
        return masked_center_forward(x_e, a_e, subject.adjacency, model_params, subject.center_local)
    return graph_model_forward(x_e, a_e, model_params)


def explanation_loss(model_params, subject, masks, target_class):
    """Masked-prediction cross-entropy toward ``target_class`` plus size and
    discreteness regularizers on the masks."""
    n_classes = model_params.config.n_classes
    if not (0 <= target_class < n_classes):
        raise ContractError(f"target class {target_class} outside 0..{n_classes - 1}")
    x_e, a_e = apply_masks(subject, masks)
    probs = _masked_prediction(model_params, subject, x_e, a_e)
    ce = ad.neg(ad.tensor_sum(ad.log(ad.narrow(probs, 1, target_class, 1))))
    p_edge = ad.sigmoid(masks.edge_params)
    loss = ad.add(ce, ad.mul(ad.tensor_sum(p_edge), masks.size_coef))
    loss = ad.add(loss, ad.mul(_binary_entropy_mean(p_edge), masks.entropy_coef))
    if masks.feat_params is not None:
        p_feat = ad.sigmoid(masks.feat_params)
        loss = ad.add(loss, ad.mul(ad.tensor_sum(p_feat), masks.size_coef))
        loss = ad.add(loss, ad.mul(_binary_entropy_mean(p_feat), masks.entropy_coef))
    return loss


def unmasked_prediction(model_params, subject):
    """Model probabilities on the untouched subgraph (no tape)."""
    with ad.no_grad():
        if model_params.config.task == "node":
            op = normalize_adjacency(subject.adjacency)
            probs = masked_center_forward(
                Tensor(subject.node_features), op, subject.adjacency, model_params, subject.center_local
            )
        else:
            probs = graph_model_forward(subject.node_features, subject.adjacency, model_params)
    return probs.values[0]


def fit_explainer(
    model_params,
    subject,
    steps=DEFAULT_STEPS,
    step_size=DEFAULT_STEP_SIZE,
    seed=0,
    size_coef=DEFAULT_SIZE_COEF,
    entropy_coef=DEFAULT_ENTROPY_COEF,
    feature_masking=False,
    optimizer="adam",
    target_class=None,
):
    """Fit masks for one prediction with the model frozen.

    Returns an :class:`Explanation` whose loss curve has ``steps + 1``
    entries (the value before each step plus the final value).
    """
    if steps < 1:
        raise ContractError(f"need at least one fitting step, got {steps}")
    theta = model_params.detached()
    if target_class is None:
        target_class = int(np.argmax(unmasked_prediction(theta, subject)))
    masks = init_masks(
        subject, seed, feature_masking=feature_masking, size_coef=size_coef, entropy_coef=entropy_coef
    )
    mask_params = masks.parameters()
    opt = ad.AdamState.for_params(mask_params, step_size) if optimizer == "adam" else None
    curve = []
    for _ in range(steps):
        with ad.Tape():
            loss = explanation_loss(theta, subject, masks, target_class)
            grads = ad.grad(loss, mask_params)
        curve.append(loss.item())
        if opt is not None:
            ad.adam_step(opt, mask_params, grads)
        else:
            for p, gr in zip(mask_params, grads):
                p.values -= step_size * gr.values
    with ad.no_grad():
        curve.append(explanation_loss(theta, subject, masks, target_class).item())

    if isinstance(subject, ComputationalSubgraph):
        node_ids = subject.node_ids
        center = subject.center
        global_pairs = node_ids[masks.edge_pairs]
    else:
        node_ids = np.arange(subject.adjacency.shape[0], dtype=np.intp)
        center = None
        global_pairs = masks.edge_pairs
    importance = _sigmoid_values(masks.edge_params.values)
    feat_importance = None if masks.feat_params is None else _sigmoid_values(masks.feat_params.values)
    return Explanation(
        center=center,
        target_class=int(target_class),
        node_ids=node_ids,
        edge_pairs=np.asarray(global_pairs, dtype=np.intp),
        edge_importance=importance,
        feature_importance=feat_importance,
        loss_curve=curve,
        masks=masks,
    )


def _sigmoid_values(x):
    return 1.0 / (1.0 + np.exp(-np.asarray(x, dtype=np.float64)))


def edge_importance_vector(explanation, g):
    """Importance per undirected edge of the full graph; edges outside the
    explained subgraph score 0."""
    edges = g.undirected_edges()
    index = {e: k for k, e in enumerate(edges)}
    out = np.zeros(len(edges))
    for (i, j), w in zip(explanation.edge_pairs.tolist(), explanation.edge_importance):
        key = (i, j) if i < j else (j, i)
        out[index[key]] = w
    return out


def top_k_subgraph(explanation, k, threshold=0.0):
    """Edge set for visualization: thresholded, connected to the explained
    node, grown greedily by descending weight up to ``k`` edges."""
    order = np.argsort(-explanation.edge_importance, kind="stable")
    surviving = [
        (tuple(explanation.edge_pairs[e].tolist()), float(explanation.edge_importance[e]))
        for e in order
        if explanation.edge_importance[e] >= threshold
    ]
    if explanation.center is None:
        return surviving[:k]
    chosen = []
    component = {int(explanation.center)}
    remaining = list(surviving)
    while remaining and len(chosen) < k:
        picked = None
        for idx, ((i, j), w) in enumerate(remaining):
            if i in component or j in component:
                picked = idx
                break
        if picked is None:
            break
        (i, j), w = remaining.pop(picked)
        component.update((i, j))
        chosen.append(((i, j), w))
    return chosen


# ---------------------------------------------------------------------------
# exports

_LABEL_COLORS = [
    "#8dd3c7", "#fb8072", "#80b1d3", "#fdb462", "#b3de69", "#fccde5", "#bc80bd", "#ffed6f",
    "#bebada", "#d9d9d9",
]


def explanation_to_dict(explanation):
    return {
        "format_version": 1,
        "center": explanation.center,
        "target_class": explanation.target_class,
        "edges": [
            [int(i), int(j), float(w)]
            for (i, j), w in zip(explanation.edge_pairs.tolist(), explanation.edge_importance)
        ],
        "feature_importance": None
        if explanation.feature_importance is None
        else [float(v) for v in explanation.feature_importance],
        "loss_curve": [float(v) for v in explanation.loss_curve],
    }


def explanation_to_dot(explanation, g, k, threshold=0.0, name=None):
    """DOT rendering: edge darkness tracks importance, node colors track labels."""
    chosen = top_k_subgraph(explanation, k, threshold)
    nodes = set()
    for (i, j), _ in chosen:
        nodes.update((i, j))
    if explanation.center is not None:
        nodes.add(int(explanation.center))
    title = name or (f"explanation_node_{explanation.center}" if explanation.center is not None else "explanation")
    lines = [f"graph {title} {{", "  node [style=filled];"]
    for v in sorted(nodes):
        label = int(g.node_labels[v]) if g.node_labels is not None else 0
        color = _LABEL_COLORS[label % len(_LABEL_COLORS)]
        extra = ", peripheries=2" if explanation.center is not None and v == explanation.center else ""
        lines.append(f'  n{v} [label="{v}", fillcolor="{color}"{extra}];')
    for (i, j), w in chosen:
        shade = int(round((1.0 - min(max(w, 0.0), 1.0)) * 200))
        gray = f"#{shade:02x}{shade:02x}{shade:02x}"
        lines.append(f'  n{i} -- n{j} [color="{gray}", penwidth={1.0 + 3.0 * w:.2f}];')
    lines.append("}")
    return "\n".join(lines) + "\n"
