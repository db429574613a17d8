import json
import os

import numpy as np
import pytest

from gnnmate import cli
from gnnmate import datasets as ds

QUICK = {
    "max_epochs": 4,
    "patience": 10,
    "explainer_steps": 3,
    "adapt_steps": 1,
}


@pytest.fixture()
def quick_config_path(tmp_path):
    path = tmp_path / "quick.json"
    path.write_text(json.dumps(QUICK))
    return str(path)


def run_cli(*argv):
    return cli.main(list(argv))


def test_generate_writes_loadable_dataset(tmp_path):
    out = str(tmp_path / "tc.json")
    assert run_cli("generate", "tree_cycles", "--seed", "3", "--out", out) == 0
    g = ds.load_dataset(out)
    assert g.n_nodes == 991
    assert g.train_mask is not None


def test_generate_rejects_unknown_dataset(tmp_path, capsys):
    code = run_cli("generate", "nope", "--out", str(tmp_path / "x.json"))
    captured = capsys.readouterr()
    assert code != 0
    err = json.loads(captured.err.strip().splitlines()[-1])
    assert "ba_shapes" in err["error"] and "tree_grids" in err["error"]


def test_train_explain_evaluate_round_trip(tmp_path, quick_config_path, capsys):
    data_path = str(tmp_path / "d.json")
    assert run_cli("generate", "ba_shapes", "--seed", "0", "--out", data_path) == 0
    out_dir = str(tmp_path / "run")
    assert (
        run_cli("train", "mate", "--dataset", data_path, "--config", quick_config_path, "--out", out_dir) == 0
    )
    ckpt = os.path.join(out_dir, "checkpoint.json")
    report = json.load(open(os.path.join(out_dir, "report.json")))
    assert report["trainer"] == "mate" and report["epochs_run"] == 4

    expl_dir = str(tmp_path / "expl")
    assert (
        run_cli(
            "explain", "--model", ckpt, "--dataset", data_path, "--nodes", "320,400",
            "--config", quick_config_path, "--out", expl_dir,
        )
        == 0
    )
    doc = json.load(open(os.path.join(expl_dir, "explanation_320.json")))
    assert doc["center"] == 320 and len(doc["loss_curve"]) == QUICK["explainer_steps"] + 1
    assert os.path.exists(os.path.join(expl_dir, "explanation_320.dot"))

    report_path = str(tmp_path / "eval.json")
    assert (
        run_cli(
            "evaluate", "--model", ckpt, "--dataset", data_path, "--seeds", "2", "--limit", "6",
            "--config", quick_config_path, "--report", report_path,
        )
        == 0
    )
    rep = json.load(open(report_path))
    assert rep["protocol"]["n_seeds"] == 2 and rep["n_entities"] == 6
    captured = capsys.readouterr()
    assert "auc_mean=" in captured.out


def test_unknown_config_key_is_usage_error(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"learning_rate": 0.1}')
    code = run_cli("train", "standard", "--dataset", "tree_cycles", "--config", str(bad), "--out", str(tmp_path / "o"))
    captured = capsys.readouterr()
    assert code == 2
    err = json.loads(captured.err.strip().splitlines()[-1])
    assert err["key"] == "learning_rate"


def test_mutag_requires_dir(tmp_path, capsys):
    code = run_cli("train", "standard", "--dataset", "mutag", "--out", str(tmp_path / "o"))
    captured = capsys.readouterr()
    assert code == 2
    assert "mutag-dir" in json.loads(captured.err.strip().splitlines()[-1])["error"]


def test_reproduce_table4_shape(tmp_path, quick_config_path):
    out = str(tmp_path / "rep")
    code = run_cli(
        "reproduce", "table4", "--out", out, "--config", quick_config_path,
        "--train-seeds", "1", "--datasets", "tree_cycles",
    )
    assert code == 0
    lines = open(os.path.join(out, "table4.csv")).read().strip().splitlines()
    assert lines[0] == "trainer,tree_cycles"
    assert lines[1].startswith("Standard,") and lines[2].startswith("MATE,")
    assert len(lines) == 3


def test_reproduce_table4_full_header_marks_missing_mutag(tmp_path, quick_config_path):
    out = str(tmp_path / "rep4")
    code = run_cli(
        "reproduce", "table4", "--out", out, "--config", quick_config_path,
        "--train-seeds", "1", "--datasets", "tree_cycles,mutag",
    )
    assert code == 0
    lines = open(os.path.join(out, "table4.csv")).read().strip().splitlines()
    assert lines[0] == "trainer,tree_cycles,mutag"
    assert lines[1].endswith(",n/a")


def test_reproduce_table3_deterministic_bytes(tmp_path, quick_config_path):
    outs = []
    for tag in ("a", "b"):
        out = str(tmp_path / f"rep3{tag}")
        code = run_cli(
            "reproduce", "table3", "--out", out, "--config", quick_config_path,
            "--train-seeds", "1", "--explainer-seeds", "1", "--eval-limit", "4",
            "--datasets", "tree_cycles",
        )
        assert code == 0
        outs.append(open(os.path.join(out, "table3.csv"), "rb").read())
    assert outs[0] == outs[1]
    text = outs[0].decode()
    assert text.splitlines()[0] == "explainer,tree_cycles"
    assert text.splitlines()[1].startswith("GNNExp,")
    assert text.splitlines()[2].startswith("MATE+GNNExp,")


def test_reproduce_fig3_outputs(tmp_path, quick_config_path):
    out = str(tmp_path / "fig3")
    code = run_cli(
        "reproduce", "fig3", "--out", out, "--config", quick_config_path,
        "--train-seeds", "1", "--explainer-seeds", "1", "--eval-limit", "4",
        "--datasets", "tree_cycles",
    )
    assert code == 0
    summary = json.load(open(os.path.join(out, "fig3_summary.json")))
    assert "tree_cycles" in summary and "mate_starts_lower" in summary["tree_cycles"]
    rows = open(os.path.join(out, "fig3_tree_cycles.csv")).read().strip().splitlines()
    assert len(rows) == 1 + 2 * 4  # header + 2 models x 4 entities x 1 seed


def test_reproduce_table5_runs_small(tmp_path, quick_config_path):
    out = str(tmp_path / "t5")
    code = run_cli(
        "reproduce", "table5", "--out", out, "--config", quick_config_path,
        "--train-seeds", "1", "--explainer-seeds", "1", "--eval-limit", "3",
        "--values", "0,1",
    )
    assert code == 0
    lines = open(os.path.join(out, "table5.csv")).read().strip().splitlines()
    assert lines[0].startswith("sweep,value")
    assert [ln.split(",")[1] for ln in lines[1:]] == ["0", "1"]


def test_ablate_command(tmp_path, quick_config_path):
    report = str(tmp_path / "sweep.csv")
    code = run_cli(
        "ablate", "--sweep", "K", "--values", "2,3", "--dataset", "tree_cycles",
        "--config", quick_config_path, "--train-seeds", "1", "--seeds", "1",
        "--limit", "3", "--report", report,
    )
    assert code == 0
    lines = open(report).read().strip().splitlines()
    assert len(lines) == 3
