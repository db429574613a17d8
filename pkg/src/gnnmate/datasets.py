"""Synthetic motif benchmarks, MUTAG ingestion, and subgraph extraction.

Node-classification datasets are single graphs with per-node labels and
split masks; graph-classification datasets are collections of small graphs
with one label each. Planted motifs carry ground-truth edge flags used by
the explanation-quality metrics.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import networkx as nx
import numpy as np

from .errors import FormatVersionError, IngestionError, ParameterError

FORMAT_VERSION = 1
SYNTHETIC_FEATURE_DIM = 10  # all-ones features, width from the reference benchmarks

# house motif: 4-cycle (two top corners 0,1 and two bottom corners 2,3)
# plus an apex node 4 connected to both top corners
HOUSE_EDGES = [(0, 1), (1, 2), (2, 3), (3, 0), (4, 0), (4, 1)]
HOUSE_ROLES = [2, 2, 3, 3, 1]  # 1=top/apex, 2=upper pair, 3=bottom pair


def _cycle_edges(k):
    return [(i, (i + 1) % k) for i in range(k)]


def _grid_edges(side):
    edges = []
    for r in range(side):
        for c in range(side):
            v = r * side + c
            if c + 1 < side:
                edges.append((v, v + 1))
            if r + 1 < side:
                edges.append((v, v + side))
    return edges


@dataclass
class GraphDataset:
    """One graph: features, dense 0/1 adjacency, labels, masks, motif flags."""

    node_features: np.ndarray
    adjacency: np.ndarray
    node_labels: np.ndarray | None = None
    graph_label: int | None = None
    train_mask: np.ndarray | None = None
    val_mask: np.ndarray | None = None
    test_mask: np.ndarray | None = None
    motif_edge_flags: np.ndarray | None = None
    name: str = ""

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    @property
    def n_classes(self):
        if self.node_labels is None:
            raise ParameterError("dataset has no node labels")
        return int(self.node_labels.max()) + 1

    def undirected_edges(self):
        """Sorted list of (i, j) with i < j for every edge."""
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(i.tolist(), j.tolist()))

    def validate(self):
        a = self.adjacency
        if a.shape[0] != a.shape[1]:
            raise IngestionError(f"adjacency not square: {a.shape}")
        if not np.array_equal(a, a.T):
            raise IngestionError("adjacency not symmetric")
        if np.diagonal(a).any():
            raise IngestionError("adjacency has self-loops")
        if self.node_features.shape[0] != a.shape[0]:
            raise IngestionError("feature row count does not match node count")
        if self.motif_edge_flags is not None:
            f = self.motif_edge_flags
            if f.shape != a.shape or not np.array_equal(f, f.T):
                raise IngestionError("motif flags not symmetric with adjacency shape")
            if (f.astype(bool) & ~a.astype(bool)).any():
                raise IngestionError("motif flag on a non-existent edge")
        masks = [m for m in (self.train_mask, self.val_mask, self.test_mask) if m is not None]
        if masks and self.node_labels is not None:
            stacked = np.stack(masks)
            if (stacked.sum(axis=0) > 1).any():
                raise IngestionError("split masks overlap")
        return self


@dataclass
class GraphSet:
    """Collection of graphs for graph classification, with per-graph splits."""

    graphs: list = field(default_factory=list)
    train_mask: np.ndarray | None = None
    val_mask: np.ndarray | None = None
    test_mask: np.ndarray | None = None
    name: str = ""

    def __len__(self):
        return len(self.graphs)

    def __iter__(self):
        return iter(self.graphs)

    def __getitem__(self, i):
        return self.graphs[i]

    @property
    def labels(self):
        return np.array([g.graph_label for g in self.graphs], dtype=np.intp)

    @property
    def n_classes(self):
        return int(self.labels.max()) + 1

    @property
    def feature_dim(self):
        return self.graphs[0].node_features.shape[1]


@dataclass
class ComputationalSubgraph:
    """Induced hop-neighborhood of a center node, with the id remapping.

    ``degrees`` holds each member's full-graph degree (plus self-loop), so a
    normalized forward pass on the subgraph reproduces the full-graph output
    at the center exactly; boundary nodes would otherwise lose degree mass.
    """

    center: int
    center_local: int
    node_ids: np.ndarray
    node_features: np.ndarray
    adjacency: np.ndarray
    degrees: np.ndarray
    hops: int

    @property
    def n_nodes(self):
        return self.adjacency.shape[0]

    def undirected_edges(self):
        i, j = np.nonzero(np.triu(self.adjacency, k=1))
        return list(zip(i.tolist(), j.tolist()))


def _edges_to_dense(n, edges):
    a = np.zeros((n, n))
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    return a


def gen_ba(n_nodes, edges_per_new_node, seed):
    """Barabasi-Albert preferential-attachment base graph (connected)."""
    if edges_per_new_node < 1 or n_nodes <= edges_per_new_node:
        raise ParameterError(f"need n_nodes > edges_per_new_node >= 1, got {n_nodes}, {edges_per_new_node}")
    g = nx.barabasi_albert_graph(n_nodes, edges_per_new_node, seed=int(seed))
    adjacency = _edges_to_dense(n_nodes, g.edges())
    features = np.ones((n_nodes, SYNTHETIC_FEATURE_DIM))
    return GraphDataset(node_features=features, adjacency=adjacency, name=f"ba_{n_nodes}_{edges_per_new_node}")


def _attach_motifs(adjacency, labels, flags, motif_edges, motif_roles, n_motifs, rng):
    """Grow the graph by ``n_motifs`` copies of a motif, one random link each."""
    n_base = adjacency.shape[0]
    motif_size = max(max(e) for e in motif_edges) + 1
    n_total = n_base + n_motifs * motif_size
    a = np.zeros((n_total, n_total))
    a[:n_base, :n_base] = adjacency
    f = np.zeros((n_total, n_total), dtype=bool)
    if flags is not None:
        f[:n_base, :n_base] = flags
    lab = np.concatenate([labels, np.zeros(n_motifs * motif_size, dtype=np.intp)])
    for m in range(n_motifs):
        start = n_base + m * motif_size
        for i, j in motif_edges:
            a[start + i, start + j] = a[start + j, start + i] = 1.0
            f[start + i, start + j] = f[start + j, start + i] = True
        lab[start : start + motif_size] = motif_roles
        anchor = int(rng.integers(0, n_base))
        port = start + int(rng.integers(0, motif_size))
        a[anchor, port] = a[port, anchor] = 1.0
    return a, lab, f


def gen_ba_shapes(seed, n_base=300, n_motifs=80, m=5):
    """BA base plus randomly attached five-node house motifs; four node roles."""
    ss = np.random.SeedSequence([int(seed), 0xBA5])
    base_seed, attach_seed = ss.spawn(2)
    base = gen_ba(n_base, m, base_seed.generate_state(1)[0] % (2**31))
    rng = np.random.default_rng(attach_seed)
    labels = np.zeros(n_base, dtype=np.intp)
    a, lab, flags = _attach_motifs(base.adjacency, labels, None, HOUSE_EDGES, HOUSE_ROLES, n_motifs, rng)
    n = a.shape[0]
    return GraphDataset(
        node_features=np.ones((n, SYNTHETIC_FEATURE_DIM)),
        adjacency=a,
        node_labels=lab,
        motif_edge_flags=flags,
        name="ba_shapes",
    ).validate()


def gen_ba_community(seed, cross_edge_rate=0.01, feature_scheme="gaussian"):
    """Two BA-shapes instances joined by random cross edges; eight roles.

    The number of cross links is ``rate * total nodes``, drawn between the
    base (non-motif) nodes of the two communities so motif ground truth stays
    clean. With all-ones features the two communities are indistinguishable
    to message passing (the construction is symmetric), so the default is the
    per-community Gaussian scheme: two feature dimensions shifted by the
    community sign, the rest standard noise.
    """
    ss = np.random.SeedSequence([int(seed), 0xC0]).spawn(4)
    g1 = gen_ba_shapes(ss[0].generate_state(1)[0] % (2**31))
    g2 = gen_ba_shapes(ss[1].generate_state(1)[0] % (2**31))
    rng = np.random.default_rng(ss[2])
    n1, n2 = g1.n_nodes, g2.n_nodes
    n = n1 + n2
    a = np.zeros((n, n))
    a[:n1, :n1] = g1.adjacency
    a[n1:, n1:] = g2.adjacency
    flags = np.zeros((n, n), dtype=bool)
    flags[:n1, :n1] = g1.motif_edge_flags
    flags[n1:, n1:] = g2.motif_edge_flags
    labels = np.concatenate([g1.node_labels, g2.node_labels + 4])
    base1 = np.flatnonzero(g1.node_labels == 0)
    base2 = np.flatnonzero(g2.node_labels == 0) + n1
    n_cross = max(1, int(round(cross_edge_rate * n)))
    added = 0
    while added < n_cross:
        u = int(rng.choice(base1))
        v = int(rng.choice(base2))
        if a[u, v] == 0:
            a[u, v] = a[v, u] = 1.0
            added += 1
    if feature_scheme == "ones":
        features = np.ones((n, SYNTHETIC_FEATURE_DIM))
    else:
        feat_rng = np.random.default_rng(ss[3])
        features = feat_rng.normal(0.0, 1.0, size=(n, SYNTHETIC_FEATURE_DIM))
        features[:n1, :2] = feat_rng.normal(-1.0, 0.5, size=(n1, 2))
        features[n1:, :2] = feat_rng.normal(1.0, 0.5, size=(n2, 2))
    return GraphDataset(
        node_features=features,
        adjacency=a,
        node_labels=labels,
        motif_edge_flags=flags,
        name="ba_community",
    ).validate()


def _gen_tree_with_motifs(seed, motif_edges, motif_roles, name, depth=8, n_motifs=80):
    ss = np.random.SeedSequence([int(seed), 0x7E]).spawn(1)[0]
    rng = np.random.default_rng(ss)
    tree = nx.balanced_tree(2, depth)
    n_base = tree.number_of_nodes()
    adjacency = _edges_to_dense(n_base, tree.edges())
    labels = np.zeros(n_base, dtype=np.intp)
    a, lab, flags = _attach_motifs(adjacency, labels, None, motif_edges, motif_roles, n_motifs, rng)
    n = a.shape[0]
    return GraphDataset(
        node_features=np.ones((n, SYNTHETIC_FEATURE_DIM)),
        adjacency=a,
        node_labels=lab,
        motif_edge_flags=flags,
        name=name,
    ).validate()


def gen_tree_cycles(seed):
    """Depth-8 balanced binary tree plus attached six-node cycles; binary labels."""
    return _gen_tree_with_motifs(seed, _cycle_edges(6), [1] * 6, "tree_cycles")


def gen_tree_grids(seed):
    """Depth-8 balanced binary tree plus attached 3x3 grid motifs; binary labels."""
    return _gen_tree_with_motifs(seed, _grid_edges(3), [1] * 9, "tree_grids")


def gen_ba_2motifs(seed, n_graphs=800, base_nodes=20, m=5):
    """Graph-classification set: BA base plus either a house (label 0) or a
    five-node cycle (label 1), half each."""
    ss = np.random.SeedSequence([int(seed), 0x2407])
    graphs = []
    for idx, child in enumerate(ss.spawn(n_graphs)):
        rng = np.random.default_rng(child)
        base_seed = int(rng.integers(0, 2**31))
        base = gen_ba(base_nodes, m, base_seed)
        label = 0 if idx < n_graphs // 2 else 1
        motif = HOUSE_EDGES if label == 0 else _cycle_edges(5)
        roles = [1] * (max(max(e) for e in motif) + 1)
        a, lab, flags = _attach_motifs(base.adjacency, np.zeros(base_nodes, dtype=np.intp), None, motif, roles, 1, rng)
        n = a.shape[0]
        graphs.append(
            GraphDataset(
                node_features=np.ones((n, SYNTHETIC_FEATURE_DIM)),
                adjacency=a,
                node_labels=lab,
                graph_label=label,
                motif_edge_flags=flags,
                name=f"ba_2motifs[{idx}]",
            )
        )
    return GraphSet(graphs=graphs, name="ba_2motifs")


MUTAG_ATOM_TYPES = 7


def load_mutag(path):
    """Read the standard 4-file MUTAG distribution from a directory.

    Expects ``<prefix>_A.txt``, ``<prefix>_graph_indicator.txt``,
    ``<prefix>_graph_labels.txt`` and ``<prefix>_node_labels.txt`` where the
    prefix is discovered from the ``*_A.txt`` file. Node features are one-hot
    atom types; graph labels are mapped to {0, 1}.
    """
    if not os.path.isdir(path):
        raise IngestionError("MUTAG directory not found", filename=str(path))
    prefix = None
    for fn in sorted(os.listdir(path)):
        if fn.endswith("_A.txt"):
            prefix = fn[: -len("_A.txt")]
            break
    if prefix is None:
        raise IngestionError("no *_A.txt edge file found", filename=str(path))

    def read_lines(stem):
        fn = os.path.join(path, f"{prefix}_{stem}.txt")
        if not os.path.isfile(fn):
            raise IngestionError("missing distribution file", filename=fn)
        with open(fn, encoding="utf-8") as fh:
            return fn, [ln.strip() for ln in fh if ln.strip()]

    def ints_from(stem, n_fields):
        fn, lines = read_lines(stem)
        rows = []
        for lineno, ln in enumerate(lines, start=1):
            parts = [p for p in ln.replace(",", " ").split() if p]
            if len(parts) != n_fields:
                raise IngestionError(f"expected {n_fields} fields, got {len(parts)}", filename=fn, line=lineno)
            try:
                rows.append([int(p) for p in parts])
            except ValueError:
                raise IngestionError("non-integer field", filename=fn, line=lineno) from None
        return fn, rows

    a_file, edge_rows = ints_from("A", 2)
    _, indicator_rows = ints_from("graph_indicator", 1)
    _, graph_label_rows = ints_from("graph_labels", 1)
    _, node_label_rows = ints_from("node_labels", 1)

    indicator = np.array([r[0] for r in indicator_rows], dtype=np.intp)
    n_nodes_total = indicator.size
    if len(node_label_rows) != n_nodes_total:
        raise IngestionError("node label count does not match graph indicator", filename=a_file)
    n_graphs = int(indicator.max())
    graph_of = indicator - 1  # files are 1-indexed
    raw_graph_labels = np.array([r[0] for r in graph_label_rows], dtype=np.intp)
    if raw_graph_labels.size != n_graphs:
        raise IngestionError("graph label count does not match indicator", filename=a_file)
    labels01 = (raw_graph_labels > 0).astype(np.intp)

    node_local = np.zeros(n_nodes_total, dtype=np.intp)
    counts = np.zeros(n_graphs, dtype=np.intp)
    for v in range(n_nodes_total):
        node_local[v] = counts[graph_of[v]]
        counts[graph_of[v]] += 1

    adjs = [np.zeros((c, c)) for c in counts]
    for lineno, (u, v) in enumerate(edge_rows, start=1):
        u -= 1
        v -= 1
        if not (0 <= u < n_nodes_total and 0 <= v < n_nodes_total):
            raise IngestionError("edge endpoint out of range", filename=a_file, line=lineno)
        if graph_of[u] != graph_of[v]:
            raise IngestionError("edge spans two graphs", filename=a_file, line=lineno)
        a = adjs[graph_of[u]]
        a[node_local[u], node_local[v]] = a[node_local[v], node_local[u]] = 1.0

    atom = np.array([r[0] for r in node_label_rows], dtype=np.intp)
    if atom.min() < 0 or atom.max() >= MUTAG_ATOM_TYPES:
        raise IngestionError(f"atom type outside 0..{MUTAG_ATOM_TYPES - 1}", filename=a_file)
    graphs = []
    for gi in range(n_graphs):
        members = np.flatnonzero(graph_of == gi)
        feats = np.zeros((counts[gi], MUTAG_ATOM_TYPES))
        feats[node_local[members], atom[members]] = 1.0
        graphs.append(
            GraphDataset(
                node_features=feats,
                adjacency=adjs[gi],
                graph_label=int(labels01[gi]),
                name=f"mutag[{gi}]",
            )
        )
    return GraphSet(graphs=graphs, name="mutag")


def extract_computational_subgraph(g, v, hops):
    """Induced subgraph over the <=hops neighborhood of node ``v``."""
    n = g.n_nodes
    if not (0 <= v < n):
        raise ParameterError(f"node {v} outside [0, {n})")
    if hops < 1:
        raise ParameterError(f"hops must be >= 1, got {hops}")
    frontier = np.zeros(n, dtype=bool)
    frontier[v] = True
    reach = frontier.copy()
    adj_bool = g.adjacency.astype(bool)
    for _ in range(hops):
        frontier = adj_bool[frontier].any(axis=0) & ~reach
        if not frontier.any():
            break
        reach |= frontier
    node_ids = np.flatnonzero(reach)
    local = {int(u): i for i, u in enumerate(node_ids)}
    sub_adj = g.adjacency[np.ix_(node_ids, node_ids)].copy()
    degrees = g.adjacency.sum(axis=1)[node_ids] + 1.0
    return ComputationalSubgraph(
        center=int(v),
        center_local=local[int(v)],
        node_ids=node_ids,
        node_features=g.node_features[node_ids].copy(),
        adjacency=sub_adj,
        degrees=degrees,
        hops=hops,
    )


def motif_component_edges(g, v):
    """Edges of the flagged motif component containing node ``v`` (global ids)."""
    if g.motif_edge_flags is None:
        raise ParameterError("dataset has no motif flags")
    flags = g.motif_edge_flags
    n = g.n_nodes
    comp = np.zeros(n, dtype=bool)
    comp[v] = True
    frontier = comp.copy()
    while frontier.any():
        frontier = flags[frontier].any(axis=0) & ~comp
        comp |= frontier
    members = np.flatnonzero(comp)
    sub = np.triu(flags[np.ix_(members, members)], k=1)
    i, j = np.nonzero(sub)
    return [(int(members[a]), int(members[b])) for a, b in zip(i, j)]


def motif_nodes(g):
    """All nodes incident to at least one flagged motif edge."""
    if g.motif_edge_flags is None:
        raise ParameterError("dataset has no motif flags")
    return np.flatnonzero(g.motif_edge_flags.any(axis=0))


def _stratified_split(labels, ids, train_frac, val_frac, rng):
    train, val, test = [], [], []
    for c in np.unique(labels):
        members = ids[labels == c]
        members = members[rng.permutation(members.size)]
        n_c = members.size
        k_tr = int(round(train_frac * n_c))
        k_val = int(round(val_frac * n_c))
        k_tr = min(k_tr, n_c)
        k_val = min(k_val, n_c - k_tr)
        train.extend(members[:k_tr])
        val.extend(members[k_tr : k_tr + k_val])
        test.extend(members[k_tr + k_val :])
    return np.array(train, dtype=np.intp), np.array(val, dtype=np.intp), np.array(test, dtype=np.intp)


def make_splits(data, train_frac=0.8, val_frac=0.1, seed=0):
    """Stratified train/val/test masks over nodes (or graphs for a GraphSet)."""
    if train_frac <= 0 or val_frac < 0 or train_frac + val_frac >= 1:
        raise ParameterError(f"bad split fractions {train_frac}/{val_frac}")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5B17]))
    if isinstance(data, GraphSet):
        labels = data.labels
        n = len(data)
    else:
        labels = data.node_labels
        n = data.n_nodes
    ids = np.arange(n, dtype=np.intp)
    tr, va, te = _stratified_split(labels, ids, train_frac, val_frac, rng)
    masks = []
    for part in (tr, va, te):
        m = np.zeros(n, dtype=bool)
        m[part] = True
        masks.append(m)
    data.train_mask, data.val_mask, data.test_mask = masks
    return data


GENERATORS = {
    "ba_shapes": gen_ba_shapes,
    "ba_community": gen_ba_community,
    "tree_cycles": gen_tree_cycles,
    "tree_grids": gen_tree_grids,
    "ba_2motifs": gen_ba_2motifs,
}


def generate(name, seed, with_splits=True):
    """Build a named benchmark and attach default 0.8/0.1/0.1 splits."""
    if name not in GENERATORS:
        raise ParameterError(f"unknown dataset '{name}'; valid names: {', '.join(sorted(GENERATORS))}")
    data = GENERATORS[name](seed)
    if with_splits:
        make_splits(data, seed=seed)
    return data


# ---------------------------------------------------------------------------
# on-disk interchange format


def _graph_to_obj(g):
    edges = g.undirected_edges()
    flagged = set()
    if g.motif_edge_flags is not None:
        fi, fj = np.nonzero(np.triu(g.motif_edge_flags, k=1))
        flagged = set(zip(fi.tolist(), fj.tolist()))
    obj = {
        "n_nodes": g.n_nodes,
        "features": g.node_features.tolist(),
        "edges": [[i, j] for i, j in edges],
        "motif_edges": sorted([i, j] for (i, j) in flagged),
    }
    if g.node_labels is not None:
        obj["node_labels"] = g.node_labels.tolist()
    if g.graph_label is not None:
        obj["graph_label"] = int(g.graph_label)
    return obj


def _masks_to_obj(holder):
    if holder.train_mask is None:
        return None
    return {
        "train": np.flatnonzero(holder.train_mask).tolist(),
        "val": np.flatnonzero(holder.val_mask).tolist(),
        "test": np.flatnonzero(holder.test_mask).tolist(),
    }


def _obj_to_graph(obj, name, filename):
    n = int(obj["n_nodes"])
    a = np.zeros((n, n))
    for k, e in enumerate(obj["edges"]):
        i, j = int(e[0]), int(e[1])
        if not (0 <= i < j < n):
            raise IngestionError(f"edge [{i}, {j}] is not an ordered pair of distinct nodes", filename=filename)
        if a[i, j]:
            raise IngestionError(f"duplicate edge [{i}, {j}]", filename=filename)
        a[i, j] = a[j, i] = 1.0
    feats = np.asarray(obj["features"], dtype=np.float64)
    flags = np.zeros((n, n), dtype=bool)
    for e in obj.get("motif_edges", []):
        i, j = int(e[0]), int(e[1])
        flags[i, j] = flags[j, i] = True
    g = GraphDataset(
        node_features=feats,
        adjacency=a,
        node_labels=np.asarray(obj["node_labels"], dtype=np.intp) if "node_labels" in obj else None,
        graph_label=obj.get("graph_label"),
        motif_edge_flags=flags if obj.get("motif_edges") else None,
        name=name,
    )
    return g.validate()


def _apply_masks_obj(holder, masks_obj, n):
    if masks_obj is None:
        return
    for key, attr in (("train", "train_mask"), ("val", "val_mask"), ("test", "test_mask")):
        m = np.zeros(n, dtype=bool)
        m[np.asarray(masks_obj[key], dtype=np.intp)] = True
        setattr(holder, attr, m)


def save_dataset(data, path):
    """Write a dataset (or graph set) as the JSON interchange document."""
    if isinstance(data, GraphSet):
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "graph_set",
            "name": data.name,
            "graphs": [_graph_to_obj(g) for g in data.graphs],
            "splits": _masks_to_obj(data),
        }
    else:
        doc = {
            "format_version": FORMAT_VERSION,
            "kind": "node",
            "name": data.name,
            "graph": _graph_to_obj(data),
            "splits": _masks_to_obj(data),
        }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
    return path


def load_dataset(path):
    """Read a dataset interchange document, validating structure on the way in."""
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise IngestionError("dataset file not found", filename=str(path)) from None
    except json.JSONDecodeError as exc:
        raise IngestionError(f"not valid JSON: {exc.msg}", filename=str(path), line=exc.lineno) from None
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise FormatVersionError(f"format_version {version!r}, expected {FORMAT_VERSION}", filename=str(path))
    kind = doc.get("kind")
    if kind == "node":
        g = _obj_to_graph(doc["graph"], doc.get("name", ""), str(path))
        _apply_masks_obj(g, doc.get("splits"), g.n_nodes)
        return g.validate()
    if kind == "graph_set":
        gs = GraphSet(name=doc.get("name", ""))
        gs.graphs = [_obj_to_graph(o, f"{gs.name}[{k}]", str(path)) for k, o in enumerate(doc["graphs"])]
        _apply_masks_obj(gs, doc.get("splits"), len(gs.graphs))
        return gs
    raise IngestionError(f"unknown dataset kind {kind!r}", filename=str(path))
