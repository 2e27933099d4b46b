"""Command line: gen, features, eval, diagnose.

Exit codes: 0 success, 2 invalid input, 3 a diagnostic check failed.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import (DEFAULT_QUALITIES, EXPERIMENT_PRESETS, TASKS, ExperimentConfig, TransformConfig,
                     default_scattering, provenance)
from .evaluation import ProtocolConfig

EXIT_OK, EXIT_INVALID, EXIT_CHECK_FAILED = 0, 2, 3


def _ints(text: str) -> tuple:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ValueError(f"cannot read config {path}: {exc}") from exc


def experiment_from_args(args) -> ExperimentConfig:
    if args.config:
        cfg = ExperimentConfig.from_dict(_load_json(args.config))
    else:
        cfg = TASKS[args.task]()
    overrides = {k: getattr(args, k) for k in ("seed", "snr_db", "num_positions", "num_echoes",
                                               "record_length", "sample_rate") if getattr(args, k) is not None}
    if args.rotations is not None:
        overrides["rotations"] = args.rotations
    return replace(cfg, **overrides) if overrides else cfg


def transforms_from_args(args) -> list[TransformConfig]:
    if args.qualities is not None:
        return [TransformConfig(args.name or "custom", "st", args.qualities, args.scales, args.subsample,
                                args.output_stride)]
    if args.config:
        cfg = ExperimentConfig.from_dict(_load_json(args.config))
        return list(cfg.transforms) if args.transform == "all" else [cfg.transform(args.transform)]
    if args.transform == "all":
        return list(ExperimentConfig.__dataclass_fields__["transforms"].default)
    if args.transform not in EXPERIMENT_PRESETS:
        raise ValueError(f"unknown transform {args.transform!r}; presets: {sorted(EXPERIMENT_PRESETS)}")
    return [EXPERIMENT_PRESETS[args.transform]]


def cmd_gen(args) -> int:
    from .pipeline import write_dataset

    cfg = experiment_from_args(args)
    path = write_dataset(cfg, args.out)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_features(args) -> int:
    from .pipeline import write_features

    for t in transforms_from_args(args):
        path = write_features(args.dataset, t, args.out, csv=args.csv)
        print(f"wrote {path}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .pipeline import evaluate, read_table

    protocol = ProtocolConfig(repeats=args.repeats, seed=args.seed, n_lambdas=args.n_lambdas)
    pairs = {}
    if args.a or args.b:
        if not (args.a and args.b):
            raise ValueError("--a and --b must be given together")
        a, b = read_table(args.a), read_table(args.b)
        if a.features.shape[1] != b.features.shape[1]:
            raise ValueError(f"incompatible tables: {a.features.shape[1]} vs {b.features.shape[1]} columns")
        if a.labels != b.labels:
            raise ValueError(f"tables label different classes: {a.labels} vs {b.labels}")
        # pooled, each row keeping the class it was written with
        pairs[f"{a.name}|{b.name}"] = (np.vstack([a.features, b.features]), np.r_[a.classes, b.classes])
    for path in args.tables:
        t = read_table(path)
        pairs[t.name] = (t.features, t.classes)
    if not pairs:
        raise ValueError("no feature tables given")
    evaluate(pairs, protocol, args.out)
    print(Path(args.out, "summary.txt").read_text(), end="")
    return EXIT_OK


def cmd_diagnose(args) -> int:
    from .diagnostics import DiagnosticsConfig, run_diagnostics
    from .pipeline import read_dataset

    signals = None
    if args.dataset:
        data, _ = read_dataset(args.dataset)
        X, _ = data.matrix()
        signals = X[: args.num_signals]
        length = X.shape[1]
    else:
        length = args.length
    if args.qualities is not None:
        from .scattering import ScatteringConfig

        cfg = ScatteringConfig.from_qualities(length, args.qualities, args.scales, args.subsample,
                                              output_stride=args.output_stride)
    elif args.preset in EXPERIMENT_PRESETS and args.preset != "avft" and args.experiment_scale:
        cfg = EXPERIMENT_PRESETS[args.preset].scattering(length)
    else:
        cfg = default_scattering(args.preset, length)
    if args.unnormalized_gain is not None:
        # negative control: skip normalisation and inflate the bank
        cfg = replace(cfg, normalize=False, gain=args.unnormalized_gain)
    opts = DiagnosticsConfig(num_signals=args.num_signals, num_shifts=args.num_shifts, seed=args.seed)
    rep = run_diagnostics(cfg, opts, signals)
    rep.write(args.out)
    meta = {"scattering": cfg.to_dict(), "options": opts.__dict__}
    Path(args.out, "provenance.json").write_text(json.dumps(provenance(meta, [args.seed]), indent=1))
    print(rep.to_text(), end="")
    return EXIT_OK if rep.passed else EXIT_CHECK_FAILED


def _experiment_flags(p):
    p.add_argument("--config", help="experiment config JSON")
    p.add_argument("--task", choices=sorted(TASKS), default="material")
    p.add_argument("--seed", type=int)
    p.add_argument("--snr-db", type=float)
    p.add_argument("--num-positions", type=int)
    p.add_argument("--num-echoes", type=int)
    p.add_argument("--record-length", type=int)
    p.add_argument("--sample-rate", type=float)
    p.add_argument("--rotations", type=_floats, help="comma-separated radians")


def _scattering_flags(p):
    p.add_argument("--qualities", type=_ints, help="per-layer Q, e.g. 8,4,4")
    p.add_argument("--scales", type=_ints, help="per-layer J")
    p.add_argument("--subsample", type=_ints, help="per-layer r")
    p.add_argument("--output-stride", type=int)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sonarscat", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen", help="synthesize a labelled two-class dataset")
    _experiment_flags(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("features", help="compute a feature table for a dataset")
    p.add_argument("dataset")
    p.add_argument("--transform", default="all", help="preset name, a transform in --config, or 'all'")
    p.add_argument("--config")
    p.add_argument("--name", help="table name for a custom --qualities transform")
    _scattering_flags(p)
    p.add_argument("--csv", action="store_true", help="also write a CSV copy")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_features)

    p = sub.add_parser("eval", help="repeated half-split evaluation of feature tables")
    p.add_argument("tables", nargs="*", help="tables holding both classes")
    p.add_argument("--a", help="first table of a pooled pair; rows keep their own labels")
    p.add_argument("--b", help="second table of the pooled pair")
    p.add_argument("--repeats", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n-lambdas", type=int, default=100)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("diagnose", help="invariance and stability checks")
    p.add_argument("--preset", choices=sorted(DEFAULT_QUALITIES), default="coarse")
    p.add_argument("--experiment-scale", action="store_true",
                   help="use the experiment preset (explicit J, r, stride) instead of plain defaults")
    p.add_argument("--length", type=int, default=1024)
    p.add_argument("--dataset", help="draw test signals from a dataset instead of random ones")
    _scattering_flags(p)
    p.add_argument("--num-signals", type=int, default=20)
    p.add_argument("--num-shifts", type=int, default=64)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--unnormalized-gain", type=float, help="test hook: skip normalisation and scale the banks")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_diagnose)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
