import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gnnmate import datasets as ds
from gnnmate import evaluation as ev
from gnnmate import model as gm
from gnnmate.errors import ContractError

RNG = np.random.default_rng(12)


def brute_force_auc(scores, flags):
    """O(P*N) pairwise oracle: wins count 1, ties 0.5."""
    scores = np.asarray(scores, dtype=np.float64)
    flags = np.asarray(flags).astype(bool)
    pos = scores[flags]
    neg = scores[~flags]
    wins = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                wins += 1.0
            elif p == n:
                wins += 0.5
    return wins / (pos.size * neg.size)


def test_auc_perfect_ranking():
    scores = np.array([0.9, 0.8, 0.2, 0.1])
    flags = np.array([1, 1, 0, 0])
    assert ev.auc_score(scores, flags) == 1.0


def test_auc_constant_scores_is_half():
    assert ev.auc_score(np.full(10, 0.3), np.arange(10) < 4) == 0.5


def test_auc_reversed_ranking_is_zero():
    assert ev.auc_score(np.array([0.1, 0.9]), np.array([1, 0])) == 0.0


@pytest.mark.parametrize("trial", range(25))
def test_auc_matches_brute_force(trial):
    rng = np.random.default_rng(trial)
    n = rng.integers(5, 60)
    # ties are likely: scores drawn from a small grid
    scores = rng.choice(np.linspace(0, 1, 7), size=n)
    flags = rng.random(n) < 0.4
    if flags.all() or not flags.any():
        flags[0] = True
        flags[-1] = False
    assert abs(ev.auc_score(scores, flags) - brute_force_auc(scores, flags)) < 1e-12


def test_auc_rejects_degenerate_labels():
    with pytest.raises(ContractError):
        ev.auc_score(np.array([0.1, 0.2]), np.array([1, 1]))
    with pytest.raises(ContractError):
        ev.auc_score(np.array([0.1, 0.2]), np.array([0, 0]))


@given(
    shift=st.floats(min_value=-5, max_value=5, allow_nan=False),
    scale=st.floats(min_value=0.01, max_value=50, allow_nan=False),
    cube=st.booleans(),
)
@settings(max_examples=40, deadline=None)
def test_auc_invariant_under_increasing_transforms(shift, scale, cube):
    rng = np.random.default_rng(77)
    scores = rng.random(40)
    flags = rng.random(40) < 0.5
    if flags.all() or not flags.any():
        flags[0] = True
        flags[1] = False
    base = ev.auc_score(scores, flags)
    moved = scores * scale + shift
    if cube:
        moved = np.sign(moved) * np.abs(moved) ** 3 + moved
    assert ev.auc_score(moved, flags) == pytest.approx(base, abs=1e-12)


def test_protocol_defaults_to_motif_nodes():
    g = ds.gen_ba_shapes(seed=1)
    protocol = ev.EvalProtocol()
    ents = protocol.resolve_entities(g)
    assert ents.size == 400
    assert ev.EvalProtocol(limit=25).resolve_entities(g).size == 25
    assert protocol.n_seeds == 10


def test_protocol_rejects_empty_set():
    g = ds.gen_ba_shapes(seed=1)
    with pytest.raises(ContractError):
        ev.EvalProtocol(entities=np.array([], dtype=np.intp)).resolve_entities(g)


@pytest.fixture(scope="module")
def quick_eval():
    g = ds.generate("ba_shapes", seed=0)
    params = gm.init_params(gm.ModelConfig(in_dim=10, n_classes=4), seed=0)
    protocol = ev.EvalProtocol(n_seeds=2, limit=12, seed=0)
    report = ev.evaluate_explainability(params, g, protocol, explainer_kwargs={"steps": 5})
    return g, params, protocol, report


def test_evaluate_bookkeeping(quick_eval):
    _, _, protocol, report = quick_eval
    assert report.n_entities == 12
    assert len(report.per_seed_auc) == 2
    assert len(report.loss_rows) == 12 * 2
    assert 0.0 <= report.auc_mean <= 1.0
    assert report.auc_std >= 0.0
    assert report.protocol["n_seeds"] == 2


def test_evaluate_never_mutates_model(quick_eval):
    g, params, protocol, _ = quick_eval
    before = [t.values.copy() for t in params.tensors()]
    ev.evaluate_explainability(params, g, protocol, explainer_kwargs={"steps": 3})
    for saved, t in zip(before, params.tensors()):
        assert np.array_equal(saved, t.values)


def test_evaluate_deterministic(quick_eval):
    g, params, protocol, report = quick_eval
    again = ev.evaluate_explainability(params, g, protocol, explainer_kwargs={"steps": 5})
    assert again.per_seed_auc == report.per_seed_auc
    assert again.loss_rows == report.loss_rows


def test_evaluate_graph_task_runs():
    gs = ds.gen_ba_2motifs(seed=0)
    params = gm.init_params(gm.ModelConfig(in_dim=10, n_classes=2, task="graph"), seed=0)
    protocol = ev.EvalProtocol(n_seeds=1, limit=6, seed=0)
    report = ev.evaluate_explainability(params, gs, protocol, explainer_kwargs={"steps": 4})
    assert report.n_entities == 6
    assert len(report.loss_rows) == 6


def test_compare_loss_curves_identical_models(quick_eval):
    _, _, _, report = quick_eval
    summary, rows = ev.compare_loss_curves(report, report)
    assert summary["mate_mean_initial"] == summary["standard_mean_initial"]
    assert not summary["mate_starts_lower"]
    assert len(rows) == 2 * len(report.loss_rows)


def test_loss_rows_csv_row_count(tmp_path, quick_eval):
    _, _, _, report = quick_eval
    _, rows = ev.compare_loss_curves(report, report)
    path = ev.write_loss_rows_csv(rows, tmp_path / "rows.csv")
    lines = open(path).read().strip().splitlines()
    assert lines[0] == "model,seed,entity,initial_loss,final_loss"
    assert len(lines) == 1 + len(rows)


def test_export_qualitative_writes_parseable_dot(tmp_path):
    g = ds.generate("tree_cycles", seed=0)
    params = gm.init_params(gm.ModelConfig(in_dim=10, n_classes=2), seed=0)
    nodes = ds.motif_nodes(g)[:3]
    paths = ev.export_qualitative(params, g, nodes.tolist(), seed=0, out_dir=tmp_path, explainer_kwargs={"steps": 4})
    assert len(paths) == 3
    for p in paths:
        text = open(p).read()
        assert text.startswith("graph ") and text.rstrip().endswith("}")
        assert text.count("{") == text.count("}") == 1
    # default k follows the motif edge count table
    assert ev.MOTIF_EDGE_COUNTS["tree_cycles"] == 6
    assert ev.MOTIF_EDGE_COUNTS["tree_grids"] == 12
    assert ev.MOTIF_EDGE_COUNTS["ba_shapes"] == 6


def test_node_auc_pads_missing_motif_edges():
    # toy: motif triangle 0-1-2 attached to a path; explanation that only saw
    # part of the motif still gets scored on all three motif edges
    a = np.zeros((5, 5))
    edges = [(0, 1), (1, 2), (0, 2), (2, 3), (3, 4)]
    for i, j in edges:
        a[i, j] = a[j, i] = 1.0
    flags = np.zeros((5, 5), dtype=bool)
    for i, j in [(0, 1), (1, 2), (0, 2)]:
        flags[i, j] = flags[j, i] = True
    g = ds.GraphDataset(
        node_features=np.ones((5, 2)),
        adjacency=a,
        node_labels=np.array([1, 1, 1, 0, 0], dtype=np.intp),
        motif_edge_flags=flags,
    )
    from gnnmate.explainer import Explanation

    expl = Explanation(
        center=0,
        target_class=1,
        node_ids=np.arange(5),
        edge_pairs=np.array([[0, 1], [2, 3], [3, 4]]),
        edge_importance=np.array([0.9, 0.2, 0.1]),
        feature_importance=None,
        loss_curve=[1.0, 0.5],
    )
    own = ds.motif_component_edges(g, 0)
    auc = ev._node_auc(g, expl, own, negatives="subgraph")
    # pool: positives (0,1)=0.9, (1,2)=0.0, (0,2)=0.0 padded; negatives 0.2, 0.1
    want = brute_force_auc(np.array([0.9, 0.0, 0.0, 0.2, 0.1]), np.array([1, 1, 1, 0, 0]))
    assert auc == pytest.approx(want, abs=1e-12)
