"""Command-line surface: dataset generation, training, explanation,
evaluation, ablations, and the canned reproduction scripts.

Every command exits 0 on success; on failure it prints one machine-readable
JSON error line to stderr and exits 2 for usage/config problems or 1 for
runtime failures. Config files are JSON documents whose keys mirror
:class:`~gnnmate.training.MateConfig`, optionally with a ``datasets``
section of per-dataset overrides.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys

import numpy as np

from .datasets import GENERATORS, GraphSet, generate, load_dataset, load_mutag, make_splits, save_dataset
from .errors import ConfigError, GnnMateError
from .evaluation import (
    EvalProtocol,
    compare_loss_curves,
    evaluate_explainability,
    export_qualitative,
    write_loss_rows_csv,
)
from .model import load_checkpoint, save_checkpoint
from .training import MateConfig, ablation_sweep, default_config, mate_train, standard_train, write_sweep_csv

log = logging.getLogger("gnnmate")

DATASET_NAMES = sorted(GENERATORS) + ["mutag"]
NODE_DATASETS = ["ba_shapes", "ba_community", "tree_cycles", "tree_grids"]
TABLE_DATASETS = ["ba_shapes", "ba_community", "tree_cycles", "tree_grids", "ba_2motifs", "mutag"]


def _load_config_file(path):
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}", key="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file is not valid JSON: {exc.msg}", key="config") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must hold a JSON object", key="config")
    return doc


def _resolve_config(dataset_name, file_doc, seed=None):
    overrides = {k: v for k, v in file_doc.items() if k != "datasets"}
    per_dataset = file_doc.get("datasets", {})
    if not isinstance(per_dataset, dict):
        raise ConfigError("'datasets' section must be an object", key="datasets")
    overrides.update(per_dataset.get(dataset_name, {}))
    if seed is not None:
        overrides["seed"] = seed
    return default_config(dataset_name, **overrides)


def _load_data(name_or_path, seed, mutag_dir=None):
    if name_or_path in GENERATORS:
        return generate(name_or_path, seed)
    if name_or_path == "mutag":
        if mutag_dir is None:
            raise ConfigError("mutag requires --mutag-dir pointing at the raw files", key="mutag-dir")
        data = load_mutag(mutag_dir)
        return make_splits(data, seed=seed)
    if os.path.exists(name_or_path):
        return load_dataset(name_or_path)
    raise ConfigError(
        f"unknown dataset {name_or_path!r}; valid names: {', '.join(DATASET_NAMES)} (or a dataset file path)",
        key="dataset",
    )


def _dataset_basename(name_or_path):
    if name_or_path in DATASET_NAMES:
        return name_or_path
    return os.path.splitext(os.path.basename(name_or_path))[0]


def _explainer_kwargs(config):
    return {
        "steps": config.explainer_steps,
        "step_size": config.explainer_step_size,
        "size_coef": config.size_coef,
        "entropy_coef": config.entropy_coef,
        "feature_masking": config.feature_masking,
        "optimizer": config.explainer_optimizer,
    }


def cmd_generate(args):
    data = generate(args.dataset, args.seed)
    save_dataset(data, args.out)
    log.info("generate dataset=%s seed=%d out=%s", args.dataset, args.seed, args.out)
    print(args.out)
    return 0


def cmd_train(args):
    data = _load_data(args.dataset, args.seed, args.mutag_dir)
    name = _dataset_basename(args.dataset)
    config = _resolve_config(name, _load_config_file(args.config), seed=args.seed)
    trainer = mate_train if args.trainer == "mate" else standard_train
    log.info("train start trainer=%s dataset=%s seed=%d", args.trainer, name, config.seed)
    params, report = trainer(data, config)
    os.makedirs(args.out, exist_ok=True)
    ckpt = os.path.join(args.out, "checkpoint.json")
    save_checkpoint(params, ckpt)
    report.save(os.path.join(args.out, "report.json"))
    acc = report.accuracies
    log.info(
        "train done epochs=%d train=%.4f val=%.4f test=%.4f wall=%.1fs",
        report.epochs_run, acc["train"], acc["val"], acc["test"], report.wall_clock_s,
    )
    print(f"{ckpt} train={acc['train']:.4f} val={acc['val']:.4f} test={acc['test']:.4f}")
    return 0


def cmd_explain(args):
    data = _load_data(args.dataset, args.seed, args.mutag_dir)
    name = _dataset_basename(args.dataset)
    config = _resolve_config(name, _load_config_file(args.config))
    params = load_checkpoint(args.model)
    entities = [int(v) for v in args.nodes.split(",") if v != ""]
    os.makedirs(args.out, exist_ok=True)
    from .datasets import extract_computational_subgraph
    from .explainer import explanation_to_dict, explanation_to_dot, fit_explainer

    from .evaluation import MOTIF_EDGE_COUNTS

    k = args.k if args.k is not None else MOTIF_EDGE_COUNTS.get(name, 6)
    for ent in entities:
        subject = data[ent] if isinstance(data, GraphSet) else extract_computational_subgraph(data, ent, config.hops)
        expl = fit_explainer(params, subject, seed=args.seed, **_explainer_kwargs(config))
        stem = os.path.join(args.out, f"explanation_{ent}")
        with open(stem + ".json", "w", encoding="utf-8") as fh:
            json.dump(explanation_to_dict(expl), fh, indent=1)
        color_source = data[ent] if isinstance(data, GraphSet) else data
        with open(stem + ".dot", "w", encoding="utf-8") as fh:
            fh.write(explanation_to_dot(expl, color_source, k=k, threshold=args.threshold))
        log.info("explain entity=%d final_loss=%.4f out=%s", ent, expl.final_loss, stem)
    print(args.out)
    return 0


def cmd_evaluate(args):
    data = _load_data(args.dataset, args.seed, args.mutag_dir)
    name = _dataset_basename(args.dataset)
    config = _resolve_config(name, _load_config_file(args.config))
    params = load_checkpoint(args.model)
    protocol = EvalProtocol(n_seeds=args.seeds, seed=args.seed, limit=args.limit)
    report = evaluate_explainability(params, data, protocol, explainer_kwargs=_explainer_kwargs(config))
    report.save(args.report)
    log.info("evaluate dataset=%s auc=%.4f std=%.4f entities=%d", name, report.auc_mean, report.auc_std, report.n_entities)
    print(f"auc_mean={report.auc_mean:.4f} auc_std={report.auc_std:.4f} report={args.report}")
    return 0


def cmd_ablate(args):
    data = _load_data(args.dataset, args.seed, args.mutag_dir)
    name = _dataset_basename(args.dataset)
    config = _resolve_config(name, _load_config_file(args.config), seed=args.seed)
    values = [int(v) for v in args.values.split(",")]
    protocol = EvalProtocol(n_seeds=args.seeds, seed=args.seed, limit=args.limit)
    rows = ablation_sweep(data, args.sweep, values, config, protocol=protocol, n_train_seeds=args.train_seeds)
    write_sweep_csv(rows, args.report)
    log.info("ablate sweep=%s values=%s report=%s", args.sweep, values, args.report)
    print(args.report)
    return 0


def _train_models(datasets, file_doc, train_seeds, mutag_dir, trainers=("standard", "mate")):
    """Train every (dataset, trainer, seed) combination; returns nested dict."""
    results = {}
    for name in datasets:
        if name == "mutag" and mutag_dir is None:
            log.info("reproduce skip dataset=mutag (no --mutag-dir)")
            continue
        data = _load_data(name, seed=0, mutag_dir=mutag_dir)
        results[name] = {"data": data, "runs": {t: [] for t in trainers}}
        for trainer_name in trainers:
            trainer = mate_train if trainer_name == "mate" else standard_train
            for s in range(train_seeds):
                config = _resolve_config(name, file_doc, seed=s)
                params, report = trainer(data, config)
                results[name]["runs"][trainer_name].append((params, report, config))
                log.info(
                    "reproduce trained dataset=%s trainer=%s seed=%d test=%.4f",
                    name, trainer_name, s, report.accuracies["test"],
                )
    return results


def _fmt_triple(accs):
    return f"{accs['train']:.2f}/{accs['val']:.2f}/{accs['test']:.2f}"


def cmd_reproduce(args):
    file_doc = _load_config_file(args.config)
    os.makedirs(args.out, exist_ok=True)
    datasets = args.datasets.split(",") if args.datasets else None

    if args.target == "table4":
        names = datasets or TABLE_DATASETS
        results = _train_models(names, file_doc, args.train_seeds, args.mutag_dir)
        path = os.path.join(args.out, "table4.csv")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("trainer," + ",".join(names) + "\n")
            for trainer_name, label in (("standard", "Standard"), ("mate", "MATE")):
                cells = []
                for name in names:
                    if name not in results:
                        cells.append("n/a")
                        continue
                    runs = results[name]["runs"][trainer_name]
                    mean = {
                        split: float(np.mean([r.accuracies[split] for _, r, _ in runs]))
                        for split in ("train", "val", "test")
                    }
                    cells.append(_fmt_triple(mean))
                fh.write(f"{label}," + ",".join(cells) + "\n")
        print(path)
        return 0

    if args.target == "table3":
        names = datasets or TABLE_DATASETS
        names = [n for n in names if n != "mutag" or args.mutag_dir]
        results = _train_models(names, file_doc, args.train_seeds, args.mutag_dir)
        path = os.path.join(args.out, "table3.csv")
        rows = {"GNNExp": {}, "MATE+GNNExp": {}}
        for name, bundle in results.items():
            if name != "mutag" and getattr(bundle["data"], "motif_edge_flags", 1) is None:
                continue
            for trainer_name, label in (("standard", "GNNExp"), ("mate", "MATE+GNNExp")):
                aucs = []
                for params, _, config in bundle["runs"][trainer_name]:
                    protocol = EvalProtocol(n_seeds=args.explainer_seeds, seed=0, limit=args.eval_limit)
                    rep = evaluate_explainability(params, bundle["data"], protocol, _explainer_kwargs(config))
                    aucs.extend(rep.per_seed_auc)
                rows[label][name] = (float(np.mean(aucs)), float(np.std(aucs)))
        with open(path, "w", encoding="utf-8") as fh:
            present = [n for n in names if n in results]
            fh.write("explainer," + ",".join(present) + "\n")
            for label in ("GNNExp", "MATE+GNNExp"):
                cells = [f"{rows[label][n][0]:.3f}±{rows[label][n][1]:.3f}" for n in present]
                fh.write(f"{label}," + ",".join(cells) + "\n")
        print(path)
        return 0

    if args.target in ("table5", "table6"):
        sweep = "T" if args.target == "table5" else "K"
        default_values = {"T": "1,3,5,10", "K": "10,20,30,40,50,60,70,80,90"}[sweep]
        values = [int(v) for v in (args.values or default_values).split(",")]
        data = _load_data("tree_cycles", seed=0, mutag_dir=None)
        config = _resolve_config("tree_cycles", file_doc, seed=0)
        protocol = EvalProtocol(n_seeds=args.explainer_seeds, seed=0, limit=args.eval_limit)
        rows = ablation_sweep(data, sweep, values, config, protocol=protocol, n_train_seeds=args.train_seeds)
        path = os.path.join(args.out, f"{args.target}.csv")
        write_sweep_csv(rows, path)
        print(path)
        return 0

    if args.target == "fig3":
        names = datasets or ["ba_shapes", "tree_grids"]
        results = _train_models(names, file_doc, args.train_seeds, None)
        summary_all = {}
        for name, bundle in results.items():
            reports = {}
            for trainer_name in ("standard", "mate"):
                per_rows = []
                for params, _, config in bundle["runs"][trainer_name]:
                    protocol = EvalProtocol(n_seeds=args.explainer_seeds, seed=0, limit=args.eval_limit)
                    rep = evaluate_explainability(params, bundle["data"], protocol, _explainer_kwargs(config))
                    per_rows.append(rep)
                reports[trainer_name] = per_rows
            summary, rows = compare_loss_curves(reports["standard"][0], reports["mate"][0])
            for extra_std, extra_mate in zip(reports["standard"][1:], reports["mate"][1:]):
                _, more = compare_loss_curves(extra_std, extra_mate)
                rows.extend(more)
            write_loss_rows_csv(rows, os.path.join(args.out, f"fig3_{name}.csv"))
            summary_all[name] = summary
        with open(os.path.join(args.out, "fig3_summary.json"), "w", encoding="utf-8") as fh:
            json.dump(summary_all, fh, indent=1)
        print(args.out)
        return 0

    raise ConfigError(f"unknown reproduce target {args.target!r}", key="target")


def build_parser():
    parser = argparse.ArgumentParser(prog="gnnmate", description=__doc__)
    parser.add_argument("--log-level", default="INFO", help="logging level for the stderr event log")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a synthetic benchmark and write the dataset file")
    p.add_argument("dataset", help=f"one of: {', '.join(sorted(GENERATORS))}")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("train", help="train a model and write checkpoint + run report")
    p.add_argument("trainer", choices=["standard", "mate"])
    p.add_argument("--dataset", required=True, help="dataset name or dataset file path")
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--mutag-dir", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("explain", help="fit explanations for chosen entities; write JSON + DOT")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--nodes", required=True, help="comma-separated node (or graph) ids")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--out", required=True)
    p.add_argument("--mutag-dir", default=None)
    p.set_defaults(func=cmd_explain)

    p = sub.add_parser("evaluate", help="explanation AUC against motif ground truth")
    p.add_argument("--model", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--seeds", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config", default=None)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--report", required=True)
    p.add_argument("--mutag-dir", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("ablate", help="sweep T or K: train + evaluate per value")
    p.add_argument("--sweep", choices=["T", "K"], required=True)
    p.add_argument("--values", required=True, help="comma-separated integers")
    p.add_argument("--dataset", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--seeds", type=int, default=10, help="explainer seeds per evaluation")
    p.add_argument("--train-seeds", type=int, default=3)
    p.add_argument("--limit", type=int, default=None)
    p.add_argument("--report", required=True)
    p.add_argument("--mutag-dir", default=None)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("reproduce", help="canned experiment scripts emitting CSV artifacts")
    p.add_argument("target", choices=["table3", "table4", "table5", "table6", "fig3"])
    p.add_argument("--out", required=True)
    p.add_argument("--config", default=None)
    p.add_argument("--train-seeds", type=int, default=5)
    p.add_argument("--explainer-seeds", type=int, default=10)
    p.add_argument("--datasets", default=None, help="comma-separated subset override")
    p.add_argument("--values", default=None, help="sweep values for table5/table6")
    p.add_argument("--eval-limit", type=int, default=None)
    p.add_argument("--mutag-dir", default=None)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper(), logging.INFO),
        format="%(asctime)s %(levelname)s %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(json.dumps({"error": str(exc), "key": exc.key}), file=sys.stderr)
        return 2
    except GnnMateError as exc:
        print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
