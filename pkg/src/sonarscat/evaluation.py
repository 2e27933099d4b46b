"""Repeated random half-split validation with ROC/AUC scoring."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .sparse_logit import LabeledDataset, decision_function, fit_path, lambda_max, select_lambda


@dataclass(frozen=True)
class RocCurve:
    fpr: np.ndarray
    tpr: np.ndarray
    thresholds: np.ndarray
    auc: float

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.fpr.tolist(), self.tpr.tolist()))


def half_splits(n: int, repeats: int = 10, seed: int = 0) -> list[tuple[np.ndarray, np.ndarray]]:
    """``repeats`` uniformly random partitions into ceil(n/2) train and floor(n/2) test."""
    if n < 4:
        raise ValueError(f"need at least 4 samples, got {n}")
    rng = np.random.default_rng(seed)
    n_train = (n + 1) // 2
    out = []
    for _ in range(repeats):
        perm = rng.permutation(n)
        out.append((np.sort(perm[:n_train]), np.sort(perm[n_train:])))
    return out


def _check_labels(labels):
    y = np.asarray(labels)
    if y.min() == y.max():
        raise ValueError("ROC needs both classes present")
    return y.astype(bool)


def roc(scores, labels) -> RocCurve:
    """ROC over every distinct threshold; AUC by the trapezoid rule."""
    s = np.asarray(scores, dtype=np.float64)
    y = _check_labels(labels)
    order = np.argsort(-s, kind="mergesort")
    s, y = s[order], y[order]
    # last index of each run of equal scores
    cut = np.r_[np.nonzero(np.diff(s))[0], s.size - 1]
    tps = np.cumsum(y)[cut]
    fps = (cut + 1) - tps
    tpr = np.r_[0.0, tps / y.sum()]
    fpr = np.r_[0.0, fps / (~y).sum()]
    thresholds = np.r_[np.inf, s[cut]]
    auc = float(np.sum(np.diff(fpr) * (tpr[1:] + tpr[:-1]) / 2))
    return RocCurve(fpr, tpr, thresholds, auc)


def auc_score(scores, labels) -> float:
    return roc(scores, labels).auc


@dataclass(frozen=True)
class ProtocolConfig:
    repeats: int = 10
    seed: int = 0
    inner_train_fraction: float = 0.75
    n_lambdas: int = 100
    lambda_min_ratio: float = 1e-3
    standardize: bool = True

    def to_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ExperimentResult:
    mean_auc: float
    aucs: list
    pooled: RocCurve
    splits: list = field(default_factory=list)        # (train idx, test idx) per repeat
    lambdas: list = field(default_factory=list)
    nonzero: list = field(default_factory=list)


def _inner_split(y: np.ndarray, fraction: float, rng) -> tuple[np.ndarray, np.ndarray]:
    n = y.size
    k = min(max(2, int(round(fraction * n))), n - 2)
    for _ in range(1000):
        perm = rng.permutation(n)
        a, b = perm[:k], perm[k:]
        if 0 < y[a].sum() < a.size and 0 < y[b].sum() < b.size:
            return np.sort(a), np.sort(b)
    raise ValueError("could not draw an inner split with both classes on each side")


def fit_selected(train: LabeledDataset, protocol: ProtocolConfig, rng):
    """Choose the penalty on an inner split of ``train``, then refit on all of it."""
    inner, val = _inner_split(train.labels, protocol.inner_train_fraction, rng)
    inner_data = train.subset(inner)
    path = fit_path(inner_data, protocol.n_lambdas, protocol.lambda_min_ratio)
    chosen = select_lambda(path, train.subset(val))
    k = next(i for i, m in enumerate(path) if m is chosen)
    # same relative position on the full-data path
    ratio = chosen.lam / lambda_max(inner_data.standardized(), inner_data.labels)
    lmax = lambda_max(train.standardized(), train.labels)
    grid = np.geomspace(lmax, lmax * ratio, k + 1) if k else np.array([lmax])
    model = fit_path(train, lambdas=grid)[-1]
    model.path = chosen.path
    return model


def run_experiment(features_a, features_b, protocol: ProtocolConfig = ProtocolConfig()) -> ExperimentResult:
    """Class A is labelled 0, class B is labelled 1."""
    A = np.asarray(features_a, dtype=np.float64)
    B = np.asarray(features_b, dtype=np.float64)
    if A.ndim != 2 or B.ndim != 2 or A.shape[1] != B.shape[1]:
        raise ValueError(f"feature width mismatch: {A.shape} vs {B.shape}")
    if not len(A) or not len(B):
        raise ValueError("both feature sets must be non-empty")
    X = np.vstack([A, B])
    y = np.r_[np.zeros(len(A)), np.ones(len(B))]
    return run_labeled(X, y, protocol)


def run_labeled(X: np.ndarray, y: np.ndarray, protocol: ProtocolConfig = ProtocolConfig()) -> ExperimentResult:
    splits = half_splits(y.size, protocol.repeats, protocol.seed)
    rng = np.random.default_rng([protocol.seed, 1])
    aucs, lams, nnz, pooled_s, pooled_y, used = [], [], [], [], [], []
    for train_idx, test_idx in splits:
        if np.intersect1d(train_idx, test_idx).size:
            raise AssertionError("train/test overlap")
        ytr, yte = y[train_idx], y[test_idx]
        if ytr.min() == ytr.max() or yte.min() == yte.max():
            continue
        model = fit_selected(LabeledDataset(X[train_idx], ytr, protocol.standardize), protocol, rng)
        scores = decision_function(model, X[test_idx])
        aucs.append(auc_score(scores, yte))
        lams.append(model.lam)
        nnz.append(model.nonzero_count)
        pooled_s.append(scores)
        pooled_y.append(yte)
        used.append((train_idx, test_idx))
    if not aucs:
        raise ValueError("no split contained both classes on both sides")
    pooled = roc(np.concatenate(pooled_s), np.concatenate(pooled_y))
    return ExperimentResult(float(np.mean(aucs)), aucs, pooled, used, lams, nnz)


# -- export -------------------------------------------------------------------

def write_aucs_csv(results: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["transform", "repeat", "auc", "lambda", "nonzero"])
        for name, res in results.items():
            for i, (a, lam, k) in enumerate(zip(res.aucs, res.lambdas, res.nonzero)):
                w.writerow([name, i, repr(a), repr(lam), k])


def write_roc_csv(results: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["transform", "fpr", "tpr", "threshold"])
        for name, res in results.items():
            c = res.pooled
            for f, t, th in zip(c.fpr, c.tpr, c.thresholds):
                w.writerow([name, repr(float(f)), repr(float(t)), repr(float(th))])


def plot_data(results: dict) -> dict:
    return {
        "series": [
            {"label": f"{name} (AUC {res.pooled.auc:.4f})", "fpr": res.pooled.fpr.tolist(),
             "tpr": res.pooled.tpr.tolist(), "mean_auc": res.mean_auc}
            for name, res in results.items()
        ],
        "diagonal": {"fpr": [0.0, 1.0], "tpr": [0.0, 1.0]},
    }


def write_plot_json(results: dict, path) -> None:
    Path(path).write_text(json.dumps(plot_data(results), indent=1, allow_nan=False))
