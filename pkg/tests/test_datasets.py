import os

import numpy as np
import pytest

from gnnmate import datasets as ds
from gnnmate.errors import FormatVersionError, IngestionError, ParameterError


@pytest.fixture(scope="module")
def ba_shapes():
    return ds.gen_ba_shapes(seed=1)


def undirected_flag_count(g):
    return int(np.triu(g.motif_edge_flags, 1).sum())


def test_gen_ba_small_m1_is_tree():
    g = ds.gen_ba(5, 1, seed=3)
    assert len(g.undirected_edges()) == 4


def test_gen_ba_deterministic():
    a = ds.gen_ba(50, 3, seed=9).adjacency
    b = ds.gen_ba(50, 3, seed=9).adjacency
    assert np.array_equal(a, b)


def test_gen_ba_heavy_tail():
    g = ds.gen_ba(300, 5, seed=0)
    deg = g.adjacency.sum(axis=0)
    assert deg.max() > 3.0 * deg.mean()


def test_gen_ba_rejects_bad_sizes():
    with pytest.raises(ParameterError):
        ds.gen_ba(3, 3, seed=0)
    with pytest.raises(ParameterError):
        ds.gen_ba(10, 0, seed=0)


def test_ba_shapes_counts(ba_shapes):
    g = ba_shapes
    assert g.n_nodes == 700
    assert sorted(set(g.node_labels.tolist())) == [0, 1, 2, 3]
    assert undirected_flag_count(g) == 80 * 6
    assert np.all(g.node_features == 1.0)


def test_ba_shapes_each_house_has_six_flagged_edges(ba_shapes):
    seen = set()
    for v in ds.motif_nodes(ba_shapes):
        edges = frozenset(map(tuple, ds.motif_component_edges(ba_shapes, int(v))))
        seen.add(edges)
        assert len(edges) == 6
    assert len(seen) == 80


def test_ba_shapes_deterministic():
    a = ds.gen_ba_shapes(seed=5)
    b = ds.gen_ba_shapes(seed=5)
    assert np.array_equal(a.adjacency, b.adjacency)
    assert np.array_equal(a.node_labels, b.node_labels)


def test_motif_flags_are_sound(ba_shapes):
    g = ba_shapes
    i, j = np.nonzero(np.triu(g.motif_edge_flags, 1))
    assert (g.node_labels[i] > 0).all() and (g.node_labels[j] > 0).all()
    assert (g.adjacency[i, j] == 1).all()


def test_ba_community_counts():
    g = ds.gen_ba_community(seed=2)
    assert g.n_nodes == 1400
    assert sorted(set(g.node_labels.tolist())) == list(range(8))
    # community recoverable from label // 4
    assert np.array_equal((np.arange(1400) >= 700).astype(int), g.node_labels // 4)


def test_tree_cycles_counts():
    g = ds.gen_tree_cycles(seed=0)
    assert g.n_nodes == 511 + 80 * 6
    assert sorted(set(g.node_labels.tolist())) == [0, 1]
    assert undirected_flag_count(g) == 80 * 6
    tree_edges = np.triu(g.adjacency[:511, :511], 1).sum()
    assert tree_edges == 510


def test_tree_grids_counts():
    g = ds.gen_tree_grids(seed=0)
    assert g.n_nodes == 511 + 80 * 9
    assert undirected_flag_count(g) == 80 * 12
    for v in ds.motif_nodes(g)[:18]:
        assert len(ds.motif_component_edges(g, int(v))) == 12
        assert g.node_labels[v] == 1


def test_ba_2motifs_counts():
    gs = ds.gen_ba_2motifs(seed=0)
    assert len(gs) == 800
    labels = gs.labels
    assert np.bincount(labels).tolist() == [400, 400]
    for g in list(gs)[:5] + list(gs)[-5:]:
        assert g.n_nodes == 25
        flagged = undirected_flag_count(g)
        assert flagged == (6 if g.graph_label == 0 else 5)
        # exactly one flagged component
        v = int(ds.motif_nodes(g)[0])
        comp = ds.motif_component_edges(g, v)
        assert len(comp) == flagged


def test_attachment_no_duplicates_or_self_loops(ba_shapes):
    a = ba_shapes.adjacency
    assert np.diagonal(a).sum() == 0
    assert set(np.unique(a)) <= {0.0, 1.0}


# ---------------------------------------------------------------------------
# MUTAG ingestion


def write_mutag_fixture(path, prefix="MUTAG"):
    # two graphs: a triangle (label 1) and a 2-path (label -1)
    files = {
        f"{prefix}_A.txt": "1, 2\n2, 1\n2, 3\n3, 2\n1, 3\n3, 1\n4, 5\n5, 4\n",
        f"{prefix}_graph_indicator.txt": "1\n1\n1\n2\n2\n",
        f"{prefix}_graph_labels.txt": "1\n-1\n",
        f"{prefix}_node_labels.txt": "0\n1\n2\n0\n0\n",
    }
    for name, content in files.items():
        with open(os.path.join(path, name), "w") as fh:
            fh.write(content)


def test_load_mutag_fixture(tmp_path):
    write_mutag_fixture(tmp_path)
    gs = ds.load_mutag(tmp_path)
    assert len(gs) == 2
    assert gs[0].graph_label == 1 and gs[1].graph_label == 0
    assert gs[0].n_nodes == 3 and gs[1].n_nodes == 2
    assert np.array_equal(gs[0].adjacency, 1 - np.eye(3))
    # one-hot atom types over 7 types
    assert gs[0].node_features.shape == (3, 7)
    assert np.array_equal(gs[0].node_features.sum(axis=1), np.ones(3))
    assert gs[0].node_features[1, 1] == 1.0


def test_load_mutag_cross_graph_edge_reports_line(tmp_path):
    write_mutag_fixture(tmp_path)
    with open(tmp_path / "MUTAG_A.txt", "a") as fh:
        fh.write("1, 4\n")
    with pytest.raises(IngestionError, match=r"_A\.txt:9"):
        ds.load_mutag(tmp_path)


def test_load_mutag_missing_file(tmp_path):
    write_mutag_fixture(tmp_path)
    os.remove(tmp_path / "MUTAG_node_labels.txt")
    with pytest.raises(IngestionError, match="node_labels"):
        ds.load_mutag(tmp_path)


def test_load_mutag_bad_field_count(tmp_path):
    write_mutag_fixture(tmp_path)
    with open(tmp_path / "MUTAG_graph_labels.txt", "w") as fh:
        fh.write("1 2\n-1\n")
    with pytest.raises(IngestionError, match="graph_labels.txt:1"):
        ds.load_mutag(tmp_path)


# ---------------------------------------------------------------------------
# computational subgraphs


def path_graph(n=5):
    a = np.zeros((n, n))
    for i in range(n - 1):
        a[i, i + 1] = a[i + 1, i] = 1.0
    return ds.GraphDataset(node_features=np.ones((n, 2)), adjacency=a, node_labels=np.zeros(n, dtype=np.intp))


def test_subgraph_one_hop_on_path():
    sub = ds.extract_computational_subgraph(path_graph(), 2, hops=1)
    assert sub.node_ids.tolist() == [1, 2, 3]
    assert sub.center_local == 1


def test_subgraph_isolated_node():
    g = path_graph()
    g.adjacency[:] = 0.0
    sub = ds.extract_computational_subgraph(g, 3, hops=3)
    assert sub.node_ids.tolist() == [3]
    assert sub.adjacency.shape == (1, 1)


def test_subgraph_membership_is_exact(ba_shapes):
    rng = np.random.default_rng(0)
    adj = ba_shapes.adjacency.astype(bool)
    for v in rng.choice(700, size=10, replace=False):
        sub = ds.extract_computational_subgraph(ba_shapes, int(v), hops=2)
        reach = {int(v)}
        frontier = {int(v)}
        for _ in range(2):
            frontier = {int(u) for w in frontier for u in np.flatnonzero(adj[w])} - reach
            reach |= frontier
        assert set(sub.node_ids.tolist()) == reach


def test_subgraph_invalid_inputs(ba_shapes):
    with pytest.raises(ParameterError):
        ds.extract_computational_subgraph(ba_shapes, 700, hops=3)
    with pytest.raises(ParameterError):
        ds.extract_computational_subgraph(ba_shapes, 0, hops=0)


# ---------------------------------------------------------------------------
# splits


def test_make_splits_partition_and_stratification(ba_shapes):
    g = ds.make_splits(ba_shapes, seed=4)
    total = g.train_mask.sum() + g.val_mask.sum() + g.test_mask.sum()
    assert total == g.n_nodes
    assert not (g.train_mask & g.val_mask).any()
    for c in range(4):
        members = g.node_labels == c
        n_c = members.sum()
        got = (g.train_mask & members).sum()
        assert abs(got - 0.8 * n_c) <= 1.0


def test_make_splits_deterministic(ba_shapes):
    a = ds.make_splits(ds.gen_ba_shapes(seed=1), seed=4)
    b = ds.make_splits(ds.gen_ba_shapes(seed=1), seed=4)
    assert np.array_equal(a.train_mask, b.train_mask)
    assert np.array_equal(a.test_mask, b.test_mask)


def test_make_splits_graph_set():
    gs = ds.gen_ba_2motifs(seed=0)
    ds.make_splits(gs, seed=0)
    assert gs.train_mask.sum() + gs.val_mask.sum() + gs.test_mask.sum() == 800
    labels = gs.labels
    per_class_train = [(gs.train_mask & (labels == c)).sum() for c in (0, 1)]
    assert abs(per_class_train[0] - per_class_train[1]) <= 1


# ---------------------------------------------------------------------------
# interchange format


def test_save_load_round_trip(tmp_path, ba_shapes):
    g = ds.make_splits(ba_shapes, seed=0)
    path = tmp_path / "d.json"
    ds.save_dataset(g, path)
    g2 = ds.load_dataset(path)
    assert np.array_equal(g.adjacency, g2.adjacency)
    assert np.array_equal(g.node_features, g2.node_features)
    assert np.array_equal(g.node_labels, g2.node_labels)
    assert np.array_equal(g.motif_edge_flags, g2.motif_edge_flags)
    assert np.array_equal(g.train_mask, g2.train_mask)


def test_save_load_graph_set_round_trip(tmp_path):
    gs = ds.make_splits(ds.gen_ba_2motifs(seed=1), seed=0)
    path = tmp_path / "gs.json"
    ds.save_dataset(gs, path)
    gs2 = ds.load_dataset(path)
    assert len(gs2) == 800
    assert np.array_equal(gs.labels, gs2.labels)
    assert np.array_equal(gs.train_mask, gs2.train_mask)
    assert np.array_equal(gs[3].adjacency, gs2[3].adjacency)


def test_load_rejects_unordered_edge(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(
        '{"format_version": 1, "kind": "node", "name": "x", '
        '"graph": {"n_nodes": 3, "features": [[1],[1],[1]], "edges": [[2,1]], '
        '"motif_edges": [], "node_labels": [0,0,0]}, "splits": null}'
    )
    with pytest.raises(IngestionError, match="ordered pair"):
        ds.load_dataset(path)


def test_load_rejects_version_mismatch(tmp_path):
    path = tmp_path / "v9.json"
    path.write_text('{"format_version": 9, "kind": "node"}')
    with pytest.raises(FormatVersionError, match="format_version"):
        ds.load_dataset(path)


def test_load_missing_file():
    with pytest.raises(IngestionError, match="not found"):
        ds.load_dataset("/nonexistent/d.json")
