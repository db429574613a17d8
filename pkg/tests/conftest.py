import hashlib
import json
import os

import numpy as np
import pytest

from gnnmate import datasets as ds
from gnnmate import model as gm
from gnnmate import training as tr


def fd_gradient(value_fn, array, h=1e-5):
    """Central finite differences of a scalar-valued closure w.r.t. an array
    mutated in place; the independent oracle for every gradient check."""
    grad = np.zeros_like(array)
    it = np.nditer(array, flags=["multi_index"])
    for _ in it:
        idx = it.multi_index
        orig = array[idx]
        array[idx] = orig + h
        f_plus = value_fn()
        array[idx] = orig - h
        f_minus = value_fn()
        array[idx] = orig
        grad[idx] = (f_plus - f_minus) / (2.0 * h)
    return grad


def max_rel_err(got, want):
    """Max entrywise deviation scaled by the oracle's magnitude."""
    got = np.asarray(got, dtype=np.float64)
    want = np.asarray(want, dtype=np.float64)
    scale = max(np.abs(want).max(), 1e-6) if want.size else 1.0
    return float(np.abs(got - want).max() / scale)


@pytest.fixture(scope="session")
def tiny_graph():
    g = ds.gen_ba(12, 2, seed=7)
    g.node_labels = np.random.default_rng(5).integers(0, 3, size=12).astype(np.intp)
    ds.make_splits(g, seed=0)
    return g


def _config_key(dataset, trainer, config):
    blob = json.dumps({"d": dataset, "t": trainer, "c": config.to_dict()}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


class TrainCache:
    """Session-wide store of trained models so slow tests share runs.

    Set GNNMATE_TEST_CACHE to a directory to persist checkpoints across
    pytest sessions (developer convenience; safe to delete any time).
    """

    def __init__(self):
        self._data = {}
        self._runs = {}
        self._disk = os.environ.get("GNNMATE_TEST_CACHE")
        if self._disk:
            os.makedirs(self._disk, exist_ok=True)

    def dataset(self, name, seed=0):
        key = (name, seed)
        if key not in self._data:
            self._data[key] = ds.generate(name, seed)
        return self._data[key]

    def run(self, dataset, trainer, seed=0, **overrides):
        config = tr.default_config(dataset, seed=seed, **overrides)
        key = _config_key(dataset, trainer, config)
        if key in self._runs:
            return self._runs[key]
        data = self.dataset(dataset)
        ckpt_path = report_path = None
        if self._disk:
            ckpt_path = os.path.join(self._disk, f"{dataset}_{trainer}_{key}.ckpt.json")
            report_path = os.path.join(self._disk, f"{dataset}_{trainer}_{key}.report.json")
            if os.path.exists(ckpt_path) and os.path.exists(report_path):
                params = gm.load_checkpoint(ckpt_path)
                with open(report_path, encoding="utf-8") as fh:
                    doc = json.load(fh)
                report = tr.RunReport(**doc)
                self._runs[key] = (params, report, data)
                return self._runs[key]
        train_fn = tr.mate_train if trainer == "mate" else tr.standard_train
        params, report = train_fn(data, config)
        if self._disk:
            gm.save_checkpoint(params, ckpt_path)
            report.save(report_path)
        self._runs[key] = (params, report, data)
        return self._runs[key]


@pytest.fixture(scope="session")
def train_cache():
    return TrainCache()
