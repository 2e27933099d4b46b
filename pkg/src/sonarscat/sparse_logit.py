"""L1-penalised binary logistic regression by cyclic coordinate descent.

Minimises ``mean NLL(b + X w) + lam * ||w||_1`` over a geometric path of
``lam`` values, warm starting each fit from the previous one. Each sweep
replaces the NLL by its quadratic model at the current point, solves that
lasso by soft-thresholded coordinate updates, and backtracks along the
resulting step until the penalised objective does not go up. Objectives are
therefore non-increasing sweep by sweep.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numba
import numpy as np


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    standardize: bool = True
    mean: np.ndarray = field(init=False)
    scale: np.ndarray = field(init=False)

    def __post_init__(self):
        X = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels)
        if X.ndim != 2 or y.ndim != 1 or X.shape[0] != y.size:
            raise ValueError("features must be (n, p) and labels (n,)")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain non-finite values")
        if not np.all((y == 0) | (y == 1)):
            raise ValueError("labels must be 0/1")
        self.features, self.labels = X, y.astype(np.float64)
        if self.standardize:
            self.mean = X.mean(axis=0)
            sd = X.std(axis=0)
            # constant columns carry no information; they stay at weight 0
            self.scale = np.where(sd > 1e-12 * (1 + np.abs(self.mean)), sd, np.inf)
        else:
            self.mean = np.zeros(X.shape[1])
            self.scale = np.ones(X.shape[1])

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def standardized(self) -> np.ndarray:
        return np.asfortranarray((self.features - self.mean) / self.scale)

    def subset(self, idx) -> "LabeledDataset":
        return LabeledDataset(self.features[idx], self.labels[idx], self.standardize)


@dataclass
class LogisticModel:
    weights: np.ndarray
    intercept: float
    lam: float
    path: list = field(default_factory=list)   # (lam, nonzero_count, validation_score)
    converged: bool = True
    sweeps: int = 0

    @property
    def nonzero_count(self) -> int:
        return int(np.count_nonzero(self.weights))

    def to_dict(self) -> dict:
        return {
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
            "lambda": self.lam,
            "path": [list(p) for p in self.path],
            "converged": self.converged,
            "sweeps": self.sweeps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogisticModel":
        return cls(np.array(d["weights"], dtype=np.float64), d["intercept"], d["lambda"],
                   [tuple(p) for p in d.get("path", [])], d.get("converged", True), d.get("sweeps", 0))

    def save(self, path, standardization: LabeledDataset | None = None) -> None:
        d = self.to_dict()
        if standardization is not None:
            d["standardization"] = {
                "mean": standardization.mean.tolist(),
                "scale": [float(s) if np.isfinite(s) else None for s in standardization.scale],
            }
        Path(path).write_text(json.dumps(d))

    @classmethod
    def load(cls, path) -> "LogisticModel":
        return cls.from_dict(json.loads(Path(path).read_text()))


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * np.asarray(z, dtype=np.float64)))


def soft_threshold(z: float, lam: float) -> float:
    return math.copysign(max(abs(z) - lam, 0.0), z)


def objective(X: np.ndarray, y: np.ndarray, beta: np.ndarray, b: float, lam: float) -> float:
    eta = b + X @ beta
    return float(np.mean(np.logaddexp(0.0, eta) - y * eta) + lam * np.abs(beta).sum())


def lambda_max(X: np.ndarray, y: np.ndarray) -> float:
    """Smallest penalty at which the all-zero weight vector is optimal (standardized X)."""
    return float(np.max(np.abs(X.T @ (y - y.mean())))) / y.size


def newton_coordinate_step(x: np.ndarray, y: np.ndarray, eta: np.ndarray, beta_j: float, lam: float) -> float:
    """Minimiser of the penalised local quadratic model in one coordinate.

    ``S(z, lam) / h`` with ``h = mean(p (1 - p) x^2)`` and
    ``z = mean(x (y - p)) + h beta_j``.
    """
    p = sigmoid(eta)
    h = float(np.mean(p * (1 - p) * x * x))
    z = float(np.mean(x * (y - p))) + h * beta_j
    return soft_threshold(z, lam) / h


@numba.njit(cache=True)
def _log1pexp(t):
    if t > 0:
        return t + math.log1p(math.exp(-t))
    return math.log1p(math.exp(t))


@numba.njit(cache=True)
def _sig(t):
    return 0.5 * (1.0 + math.tanh(0.5 * t))


@numba.njit(cache=True)
def _nll(eta, y):
    s = 0.0
    for i in range(eta.size):
        s += _log1pexp(eta[i]) - y[i] * eta[i]
    return s / eta.size


@numba.njit(cache=True)
def _soft(z, lam):
    a = abs(z) - lam
    if a <= 0.0:
        return 0.0
    return a if z > 0 else -a


@numba.njit(cache=True)
def _penalised(X, y, beta, b, lam, eta):
    n, p = X.shape
    for i in range(n):
        eta[i] = b
    l1 = 0.0
    for j in range(p):
        if beta[j] != 0.0:
            l1 += abs(beta[j])
            for i in range(n):
                eta[i] += beta[j] * X[i, j]
    return _nll(eta, y) + lam * l1


@numba.njit(cache=True)
def _cd_pass(X, w, res, beta, lam, coords, xwx, fresh):
    """One cyclic pass of the weighted least-squares lasso; res = w * (z - eta)."""
    n = X.shape[0]
    biggest = 0.0
    for j in coords:
        x = X[:, j]
        if fresh[j]:
            h = 0.0
            for i in range(n):
                h += w[i] * x[i] * x[i]
            xwx[j] = h / n
            fresh[j] = False
        h = xwx[j]
        if h <= 1e-12:
            continue
        g = 0.0
        for i in range(n):
            g += x[i] * res[i]
        g /= n
        bj = beta[j]
        nb = _soft(g + h * bj, lam) / h
        d = nb - bj
        if d != 0.0:
            for i in range(n):
                res[i] -= w[i] * x[i] * d
            beta[j] = nb
            biggest = max(biggest, abs(d))
    return biggest


@numba.njit(cache=True)
def _cd_intercept(w, res):
    sw = 0.0
    sr = 0.0
    for i in range(w.size):
        sw += w[i]
        sr += res[i]
    d = sr / sw
    for i in range(w.size):
        res[i] -= w[i] * d
    return d, abs(d)


@numba.njit(cache=True)
def _solve(X, y, lam, beta, b, eta, tol, max_sweeps, trace):
    """Proximal Newton with a cyclic inner solver; returns (b, sweeps, converged, n_trace).

    Every outer sweep refits the lasso on the quadratic model of the NLL at
    the current point, then backtracks along the step until the penalised
    objective does not increase.
    """
    n, p = X.shape
    everything = np.arange(p)
    w = np.empty(n)
    res = np.empty(n)
    xwx = np.empty(p)
    fresh = np.ones(p, dtype=np.bool_)
    trial_eta = np.empty(n)
    obj = _penalised(X, y, beta, b, lam, eta)
    n_trace = 0
    for sweep in range(1, max_sweeps + 1):
        for i in range(n):
            q = _sig(eta[i])
            w[i] = max(q * (1.0 - q), 1e-5)
            res[i] = y[i] - q
        fresh[:] = True
        new_beta = beta.copy()
        new_b = b
        # inner: full pass, then the active set until it settles
        for _ in range(1000):
            db, c0 = _cd_intercept(w, res)
            new_b += db
            change = max(c0, _cd_pass(X, w, res, new_beta, lam, everything, xwx, fresh))
            if change < tol:
                break
            active = np.nonzero(new_beta)[0]
            for _ in range(1000):
                db, c0 = _cd_intercept(w, res)
                new_b += db
                if max(c0, _cd_pass(X, w, res, new_beta, lam, active, xwx, fresh)) < tol:
                    break
        step = 1.0
        accepted = False
        for _ in range(40):
            tb = beta + step * (new_beta - beta)
            tobj = _penalised(X, y, tb, b + step * (new_b - b), lam, trial_eta)
            if tobj <= obj:
                accepted = True
                break
            step *= 0.5
        moved = 0.0
        if accepted:
            for j in range(p):
                moved = max(moved, abs(tb[j] - beta[j]))
            beta[:] = tb
            b = b + step * (new_b - b)
            eta[:] = trial_eta
            done = moved < tol
            obj = tobj
        else:
            done = True
        if n_trace < trace.size:
            trace[n_trace] = obj
            n_trace += 1
        if done:
            return b, sweep, True, n_trace
    return b, max_sweeps, False, n_trace


@dataclass
class _Problem:
    X: np.ndarray
    y: np.ndarray
    data: LabeledDataset

    @classmethod
    def from_data(cls, data: LabeledDataset) -> "_Problem":
        X = data.standardized()
        return cls(X, data.labels, data)

    def to_model(self, beta, b, lam, converged, sweeps) -> LogisticModel:
        w = beta / self.data.scale
        return LogisticModel(w, float(b - np.dot(w, self.data.mean)), float(lam),
                             converged=bool(converged), sweeps=int(sweeps))


def _check_classes(y):
    if y.min() == y.max():
        raise ValueError("training data must contain both classes")


def solve_standardized(X, y, lam, beta=None, b=None, tol=1e-7, max_sweeps=10_000, trace_len=0):
    """Coordinate descent on already-standardized data; returns (beta, b, info)."""
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if beta is None:
        beta = np.zeros(X.shape[1])
    else:
        beta = np.array(beta, dtype=np.float64)
    if b is None:
        ybar = y.mean()
        b = math.log(ybar / (1 - ybar))
    eta = b + X @ beta
    trace = np.empty(trace_len)
    b, sweeps, conv, nt = _solve(X, y, float(lam), beta, float(b), eta, tol, max_sweeps, trace)
    return beta, b, {"sweeps": sweeps, "converged": conv, "trace": trace[:nt]}


def lambda_grid(data: LabeledDataset, n_lambdas: int = 100, lambda_min_ratio: float = 1e-3) -> np.ndarray:
    lmax = lambda_max(data.standardized(), data.labels)
    if n_lambdas == 1:
        return np.array([lmax])
    return np.geomspace(lmax, lmax * lambda_min_ratio, n_lambdas)


def fit_path(data: LabeledDataset, n_lambdas: int = 100, lambda_min_ratio: float = 1e-3,
             lambdas=None, tol: float = 1e-7, max_sweeps: int = 10_000,
             max_deviance_ratio: float = 0.999) -> list[LogisticModel]:
    """Warm-started fits along a decreasing penalty sequence.

    The default sequence is geometric from ``lambda_max`` (all-zero weights,
    intercept ``logit(mean(y))``) down to ``lambda_max * lambda_min_ratio``.
    The path is cut short once the fit explains ``max_deviance_ratio`` of the
    null deviance: on separable data smaller penalties only inflate the
    weights without changing the ranking.
    """
    if n_lambdas < 1:
        raise ValueError("n_lambdas must be >= 1")
    _check_classes(data.labels)
    prob = _Problem.from_data(data)
    lmax = lambda_max(prob.X, prob.y)
    if lambdas is None:
        lambdas = lambda_grid(data, n_lambdas, lambda_min_ratio)
    lambdas = np.sort(np.asarray(lambdas, dtype=np.float64))[::-1]
    ybar = prob.y.mean()
    b = math.log(ybar / (1 - ybar))
    beta = np.zeros(prob.X.shape[1])
    eta = np.full(prob.y.size, b)
    empty = np.empty(0)
    null_nll = _nll(eta, prob.y)
    n = prob.y.size
    prev_lam = lmax
    models = []
    for lam in lambdas:
        if lam >= lmax:
            models.append(prob.to_model(np.zeros_like(beta), math.log(ybar / (1 - ybar)), lam, True, 0))
            continue
        # sequential strong rule for the working set, then a full KKT check
        grad = prob.X.T @ (prob.y - sigmoid(eta)) / n
        work = np.flatnonzero((np.abs(grad) >= 2 * lam - prev_lam) | (beta != 0))
        sweeps, conv = 0, True
        while True:
            sub = np.asfortranarray(prob.X[:, work])
            bsub = beta[work]
            b, k, ok, _ = _solve(sub, prob.y, float(lam), bsub, float(b), eta, tol, max_sweeps, empty)
            beta[work] = bsub
            sweeps, conv = sweeps + k, conv and ok
            grad = prob.X.T @ (prob.y - sigmoid(eta)) / n
            missed = np.abs(grad) > lam
            missed[work] = False
            if not missed.any():
                break
            work = np.union1d(work, np.flatnonzero(missed))
        prev_lam = lam
        if not conv:
            warnings.warn(f"coordinate descent did not converge at lambda={lam:.3g}", RuntimeWarning)
        models.append(prob.to_model(beta.copy(), b, lam, conv, sweeps))
        if 1.0 - _nll(eta, prob.y) / null_nll >= max_deviance_ratio:
            break
    return models


def predict_proba(model: LogisticModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != model.weights.size:
        raise ValueError(f"expected {model.weights.size} features, got {X.shape[1]}")
    return sigmoid(X @ model.weights + model.intercept)


def decision_function(model: LogisticModel, features) -> np.ndarray:
    X = np.asarray(features, dtype=np.float64)
    if X.shape[-1] != model.weights.size:
        raise ValueError(f"expected {model.weights.size} features, got {X.shape[-1]}")
    return X @ model.weights + model.intercept


def select_lambda(path: list[LogisticModel], heldout: LabeledDataset) -> LogisticModel:
    """Model with the best held-out AUC; ties go to the larger penalty."""
    from .evaluation import auc_score

    if not path:
        raise ValueError("empty regularization path")
    summary, best, best_key = [], None, None
    for m in path:
        score = auc_score(decision_function(m, heldout.features), heldout.labels)
        summary.append((m.lam, m.nonzero_count, score))
        key = (score, m.lam)
        if best_key is None or key > best_key:
            best, best_key = m, key
    best.path = summary
    return best
