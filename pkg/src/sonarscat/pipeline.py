"""Dataset generation, feature tables and evaluation reports on disk.

A dataset directory holds ``manifest.json`` and one binary signal file per
record. A feature table is a group of files sharing a stem: ``.npy`` matrix,
``.rows.json`` (group label and source file per row), ``.legend.json`` and
``.transform.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .avft import avft_batch
from .config import ExperimentConfig, TransformConfig, canonical_json, provenance
from .echo import default_pulse, synthesize
from .evaluation import (ExperimentResult, ProtocolConfig, run_experiment, run_labeled, write_aucs_csv,
                         write_plot_json, write_roc_csv)
from .scattering import build_network, flatten, scatter
from .signal import read_binary, write_binary

MANIFEST = "manifest.json"


def _group_seed(seed: int, group: int, rotation: int) -> int:
    return int(np.random.SeedSequence([int(seed), group, rotation]).generate_state(1)[0])


@dataclass
class Dataset:
    labels: tuple                 # group labels, class 0 first
    signals: dict                 # label -> (n, N) array
    files: dict                   # label -> list of relative paths
    sample_rate: float

    def matrix(self) -> tuple[np.ndarray, np.ndarray]:
        X = np.vstack([self.signals[l] for l in self.labels])
        y = np.concatenate([np.full(len(self.signals[l]), i) for i, l in enumerate(self.labels)])
        return X, y


def generate(cfg: ExperimentConfig) -> Dataset:
    pulse = default_pulse(cfg.sample_rate, cfg.pulse_frequency)
    signals, files, seeds = {}, {}, []
    for g, group in enumerate(cfg.groups):
        rows, names = [], []
        for k, rot in enumerate(cfg.rotations):
            s = _group_seed(cfg.seed, g, k)
            seeds.append(s)
            recs = synthesize(group.scene(cfg, rot), pulse, cfg.record_length, cfg.snr_db, s,
                              normalize=cfg.normalize)
            rows.extend(r.samples for r in recs)
            names.extend(f"{group.label}/rot{k}_pos{i:03d}.sgnl" for i in range(len(recs)))
        signals[group.label] = np.array(rows)
        files[group.label] = names
    return Dataset(tuple(g.label for g in cfg.groups), signals, files, cfg.sample_rate)


def write_dataset(cfg: ExperimentConfig, directory) -> Path:
    from .signal import Signal

    directory = Path(directory)
    data = generate(cfg)
    for label in data.labels:
        (directory / label).mkdir(parents=True, exist_ok=True)
        for name, row in zip(data.files[label], data.signals[label]):
            write_binary(Signal(row, data.sample_rate), directory / name)
    seeds = [_group_seed(cfg.seed, g, k) for g in range(2) for k in range(len(cfg.rotations))]
    manifest = {
        "config": cfg.to_dict(),
        "provenance": provenance(cfg.to_dict(), seeds),
        "record_length": cfg.record_length,
        "sample_rate": cfg.sample_rate,
        "groups": [{"label": l, "count": len(data.files[l]), "files": data.files[l]} for l in data.labels],
    }
    path = directory / MANIFEST
    path.write_text(json.dumps(manifest, indent=1, allow_nan=False))
    return path


def read_dataset(directory) -> tuple[Dataset, dict]:
    directory = Path(directory)
    try:
        manifest = json.loads((directory / MANIFEST).read_text())
        groups = manifest["groups"]
        n, fs = int(manifest["record_length"]), float(manifest["sample_rate"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise ValueError(f"corrupt or missing manifest in {directory}: {exc}") from exc
    if len(groups) != 2:
        raise ValueError(f"manifest lists {len(groups)} groups, expected 2")
    signals, files = {}, {}
    for g in groups:
        if len(g["files"]) != g["count"]:
            raise ValueError(f"group {g['label']}: count {g['count']} but {len(g['files'])} files")
        rows = []
        for name in g["files"]:
            sig = read_binary(directory / name)
            if len(sig) != n:
                raise ValueError(f"{name}: length {len(sig)}, manifest says {n}")
            rows.append(sig.samples)
        signals[g["label"]] = np.array(rows).reshape(len(rows), n)
        files[g["label"]] = list(g["files"])
    return Dataset(tuple(g["label"] for g in groups), signals, files, fs), manifest


# -- features -------------------------------------------------------------------

def transform_matrix(transform: TransformConfig, signals: np.ndarray) -> tuple[np.ndarray, list]:
    """Feature rows for ``signals`` (n, N) and the column legend."""
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    n = signals.shape[1]
    if transform.kind == "avft":
        legend = [{"bin": k} for k in range(n // 2 + 1)]
        return avft_batch(signals, log=transform.log), legend
    net = build_network(transform.scattering(n))
    rows, legend = [], None
    for x in signals:
        vec, leg = flatten(scatter(x, net))
        rows.append(vec)
        legend = legend or leg
    legend = [{"layer": m, "path": list(p), "time": t} for m, p, t in legend]
    return np.array(rows), legend


def _transform_descriptor(transform: TransformConfig, signal_length: int) -> dict:
    d = {"transform": transform.to_dict(), "signal_length": signal_length}
    if transform.kind == "st":
        net = build_network(transform.scattering(signal_length))
        d["scattering"] = net.config.to_dict()
        d["output_stride"] = net.output_stride
        d["banks"] = [b.to_descriptor() for b in net.banks]
    return d


def write_features(dataset_dir, transform: TransformConfig, out_dir, csv: bool = False) -> Path:
    data, manifest = read_dataset(dataset_dir)
    X, y = data.matrix()
    try:
        feats, legend = transform_matrix(transform, X)
    except ValueError as exc:
        raise ValueError(f"transform {transform.name}: {exc}") from exc
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = out_dir / transform.name
    np.save(stem.with_suffix(".npy"), feats)
    rows = [{"label": data.labels[int(c)], "class": int(c), "file": f}
            for c, f in zip(y, [f for l in data.labels for f in data.files[l]])]
    descriptor = _transform_descriptor(transform, X.shape[1])
    descriptor["provenance"] = provenance(descriptor, manifest.get("provenance", {}).get("seeds"))
    descriptor["provenance"]["dataset_sha256"] = manifest.get("provenance", {}).get("config_sha256")
    stem.with_suffix(".rows.json").write_text(json.dumps({"labels": list(data.labels), "rows": rows}, indent=1))
    stem.with_suffix(".legend.json").write_text(canonical_json(legend))
    stem.with_suffix(".transform.json").write_text(json.dumps(descriptor, indent=1, allow_nan=False))
    if csv:
        np.savetxt(stem.with_suffix(".csv"), feats, delimiter=",", fmt="%.17g")
    return stem.with_suffix(".npy")


@dataclass
class FeatureTable:
    name: str
    features: np.ndarray
    classes: np.ndarray
    labels: tuple

    def split(self) -> tuple[np.ndarray, np.ndarray]:
        return self.features[self.classes == 0], self.features[self.classes == 1]


def read_table(path) -> FeatureTable:
    path = Path(path)
    stem = path.with_suffix("") if path.suffix == ".npy" else path
    try:
        feats = np.load(stem.with_suffix(".npy"))
        meta = json.loads(stem.with_suffix(".rows.json").read_text())
    except (OSError, ValueError) as exc:
        raise ValueError(f"cannot read feature table {stem}: {exc}") from exc
    classes = np.array([r["class"] for r in meta["rows"]])
    if feats.ndim != 2 or feats.shape[0] != classes.size:
        raise ValueError(f"{stem}: {feats.shape} matrix for {classes.size} rows")
    return FeatureTable(stem.name, feats, classes, tuple(meta["labels"]))


# -- evaluation ---------------------------------------------------------------------

def leak_alarms(X: np.ndarray, y: np.ndarray, result: ExperimentResult) -> list[str]:
    """Reasons to distrust a result; empty when nothing looks wrong."""
    alarms = []
    keys = [r.tobytes() for r in X]
    crossing = 0
    for train_idx, test_idx in result.splits:
        seen = {keys[i] for i in train_idx}
        crossing += sum(keys[i] in seen for i in test_idx)
    if crossing:
        alarms.append(f"{crossing} test rows duplicate a training row across {len(result.splits)} splits")
    conflicting = {keys[i] for i in np.flatnonzero(y == 0)} & {keys[i] for i in np.flatnonzero(y == 1)}
    if conflicting:
        alarms.append(f"{len(conflicting)} identical feature rows carry both labels")
    if result.mean_auc >= 0.999:
        lo, hi = X[y == 0], X[y == 1]
        perfect = np.flatnonzero((lo.max(0) < hi.min(0)) | (hi.max(0) < lo.min(0)))
        msg = f"mean AUC {result.mean_auc:.6f} is near perfect"
        if perfect.size:
            msg += f"; {perfect.size} single columns separate the classes on their own (first: {perfect[0]})"
        alarms.append(msg)
    return alarms


def evaluate(pairs: dict, protocol: ProtocolConfig, out_dir) -> dict:
    """Run the protocol on each ``name -> (features, labels)`` entry and write reports."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results, alarms = {}, {}
    for name, (X, y) in pairs.items():
        X, y = np.asarray(X, dtype=float), np.asarray(y)
        res = run_labeled(X, y, protocol)
        results[name] = res
        alarms[name] = leak_alarms(X, y, res)
    write_aucs_csv(results, out_dir / "aucs.csv")
    write_roc_csv(results, out_dir / "roc.csv")
    write_plot_json(results, out_dir / "plot.json")
    ranked = sorted(results.items(), key=lambda kv: -kv[1].mean_auc)
    lines = [f"{'transform':<16} {'mean_auc':>9} {'sd':>8} {'pooled':>8}"]
    for name, res in ranked:
        lines.append(f"{name:<16} {res.mean_auc:9.4f} {np.std(res.aucs):8.4f} {res.pooled.auc:8.4f}")
    for name, msgs in alarms.items():
        for m in msgs:
            lines.append(f"LEAK ALARM [{name}]: {m}")
    meta = {"protocol": protocol.to_dict(), "provenance": provenance(protocol.to_dict(), [protocol.seed])}
    lines.append(f"config_sha256 {meta['provenance']['config_sha256']}")
    (out_dir / "summary.txt").write_text("\n".join(lines) + "\n")
    (out_dir / "report.json").write_text(json.dumps({
        **meta,
        "results": {n: {"mean_auc": r.mean_auc, "aucs": r.aucs, "pooled_auc": r.pooled.auc,
                        "lambdas": r.lambdas, "nonzero": r.nonzero, "alarms": alarms[n]}
                    for n, r in results.items()},
        "ranking": [n for n, _ in ranked],
    }, indent=1, allow_nan=False))
    return {"results": results, "alarms": alarms, "ranking": [n for n, _ in ranked]}



def run_task(cfg: ExperimentConfig) -> dict:
    """Generate, featurize and evaluate in memory; ``name -> ExperimentResult``."""
    data = generate(cfg)
    a, b = (data.signals[l] for l in data.labels)
    results = {}
    for t in cfg.transforms:
        fa, _ = transform_matrix(t, a)
        fb, _ = transform_matrix(t, b)
        results[t.name] = run_experiment(fa, fb, cfg.protocol)
    return results
