"""Invariance and stability checks for a scattering network, as a pass/fail table."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .filterbank import admissibility_level, littlewood_paley
from .scattering import (ScatteringConfig, build_network, deformation_sensitivity, feature_distance,
                         layer_energies, scatter, total_stride,
                         translation_covariance_defect, translation_sensitivity)
from .signal import Signal, max_warp_slope


def random_bandlimited(length: int, count: int, seed: int = 0, cutoff: float = 0.25) -> np.ndarray:
    """``count`` unit-norm real signals with no energy above ``cutoff`` cycles/sample."""
    rng = np.random.default_rng(seed)
    k = np.fft.rfftfreq(length)
    keep = (k <= cutoff) & (k > 0)
    spec = (rng.standard_normal((count, k.size)) + 1j * rng.standard_normal((count, k.size))) * keep
    x = np.fft.irfft(spec, n=length, axis=-1)
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def smooth_displacement(length: int, seed: int = 0, modes: int = 3) -> np.ndarray:
    """Random low-frequency displacement field with sup norm 1 (in samples)."""
    rng = np.random.default_rng(seed)
    x = np.arange(length) / length
    tau = np.zeros(length)
    for m in range(1, modes + 1):
        tau += rng.standard_normal() * np.cos(2 * np.pi * m * x + rng.uniform(0, 2 * np.pi)) / m
    return tau / np.max(np.abs(tau))


@dataclass
class Check:
    name: str
    passed: bool
    value: float
    limit: float
    detail: str = ""


@dataclass
class DiagnosticsReport:
    checks: list = field(default_factory=list)
    banks: list = field(default_factory=list)           # (layer, a, b, level)
    covariance: list = field(default_factory=list)      # (signal, shift, defect)
    translation: list = field(default_factory=list)     # (signal, shift, measured, bound)
    deformation: list = field(default_factory=list)     # (signal, amplitude, distance, ratio)
    energies: list = field(default_factory=list)        # per signal: energy by depth
    contraction: list = field(default_factory=list)     # (pair, feature distance, input distance)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_text(self) -> str:
        lines = [f"{'check':<24} {'result':<6} {'value':>12} {'limit':>12}  detail"]
        for c in self.checks:
            lines.append(f"{c.name:<24} {'PASS' if c.passed else 'FAIL':<6} {c.value:12.4e} {c.limit:12.4e}  {c.detail}")
        lines.append("")
        lines.append("frame bounds per layer (a, b, max{b, b gamma^2/r})")
        for layer, a, b, lvl in self.banks:
            lines.append(f"  layer {layer}: a={a:.6f} b={b:.6f} level={lvl:.12f}")
        if self.energies:
            mean = np.mean(np.array(self.energies), axis=0)
            lines.append("mean energy by depth: " + " ".join(f"{e:.4e}" for e in mean))
        return "\n".join(lines) + "\n"

    def write(self, directory) -> None:
        out = Path(directory)
        out.mkdir(parents=True, exist_ok=True)
        (out / "checks.txt").write_text(self.to_text())
        tables = {
            "translation.csv": (["signal", "shift", "measured", "bound"], self.translation),
            "covariance.csv": (["signal", "shift", "defect"], self.covariance),
            "deformation.csv": (["signal", "amplitude", "distance", "ratio"], self.deformation),
            "contraction.csv": (["pair", "feature_distance", "input_distance"], self.contraction),
        }
        for name, (header, rows) in tables.items():
            with open(out / name, "w", newline="") as fh:
                w = csv.writer(fh)
                w.writerow(header)
                w.writerows([[repr(v) if isinstance(v, float) else v for v in r] for r in rows])
        (out / "report.json").write_text(json.dumps({
            "passed": self.passed,
            "checks": [asdict(c) for c in self.checks],
            "banks": self.banks,
            "energies": self.energies,
        }, indent=1))


@dataclass(frozen=True)
class DiagnosticsConfig:
    num_signals: int = 20
    num_shifts: int = 64
    covariance_shifts: int = 5
    warp_amplitudes: tuple | None = None    # sup |tau| in samples; None: N/128 halved three times
    num_pairs: int = 50
    seed: int = 0
    covariance_tol: float = 1e-8
    admissibility_tol: float = 1e-9
    contraction_tol: float = 1e-10
    monotone_slack: float = 1e-9
    ratio_spread: float = 10.0


def warp_grid(length: int, points: int = 4) -> tuple:
    return tuple(length / 128 / 2**k for k in range(points))


def _bank_rows(net) -> list:
    rows = []
    for m, (bank, r) in enumerate(zip(net.banks, net.config.rates), start=1):
        a, b = littlewood_paley(bank)
        rows.append((m, a, b, admissibility_level(b, net.config.lipschitz, r)))
    return rows


def run_diagnostics(cfg: ScatteringConfig, opts: DiagnosticsConfig = DiagnosticsConfig(),
                    signals: np.ndarray | None = None) -> DiagnosticsReport:
    """Run every check on ``signals`` (or random band-limited ones) for ``cfg``."""
    net = build_network(cfg)
    n = cfg.signal_length
    if signals is None:
        signals = random_bandlimited(n, opts.num_signals, opts.seed)
    signals = np.atleast_2d(np.asarray(signals, dtype=np.float64))
    if signals.shape[1] != n:
        raise ValueError(f"signals have length {signals.shape[1]}, network expects {n}")
    rep = DiagnosticsReport(banks=_bank_rows(net))

    worst = max(lvl for *_, lvl in rep.banks)
    rep.checks.append(Check("weak_admissibility", worst <= 1 + opts.admissibility_tol, worst, 1.0,
                            "max over layers of max{b, b gamma^2/r}"))

    step = total_stride(net)
    shifts = [(k * step) % n for k in range(1, opts.covariance_shifts + 1)]
    bases = [scatter(x, net) for x in signals]
    for i, x in enumerate(signals):
        for t in shifts:
            rep.covariance.append((i, t, translation_covariance_defect(x, net, t, bases[i])))
    worst = max(d for *_, d in rep.covariance)
    note = f"shifts are multiples of the total stride {step}"
    if step >= n:
        note += " (equal to the record length, so only trivial shifts exist)"
    rep.checks.append(Check("translation_covariance", worst <= opts.covariance_tol, worst,
                            opts.covariance_tol, note))

    ts = np.unique(np.round(np.linspace(1, max(2, n // 8), opts.num_shifts)).astype(int))
    slack = -math.inf
    for i, x in enumerate(signals):
        for t in ts:
            measured, bound = translation_sensitivity(x, net, int(t), bases[i])
            rep.translation.append((i, int(t), measured, bound))
            slack = max(slack, measured - bound)
    rep.checks.append(Check("translation_bound", slack <= 0, slack, 0.0,
                            "max of measured drift minus 2 pi t K / prod(r) ||f||"))

    ok_mono = True
    amps = sorted(opts.warp_amplitudes or warp_grid(n), reverse=True)
    for i, x in enumerate(signals):
        base_tau = smooth_displacement(n, opts.seed + 1000 + i)
        norm = float(np.linalg.norm(x))
        dists = []
        for a in amps:
            tau = Signal(a * base_tau, 1.0)
            d = deformation_sensitivity(x, net, tau, bases[i])
            ratio = d / (a * norm)
            dists.append(d)
            rep.deformation.append((i, float(a), d, ratio))
        ok_mono &= all(dists[k + 1] <= dists[k] + opts.monotone_slack for k in range(len(dists) - 1))
    ratios = np.array([r[3] for r in rep.deformation])
    med = float(np.median(ratios))
    spread = float(max(ratios.max() / med, med / ratios.min())) if med > 0 else math.inf
    rep.checks.append(Check("deformation_monotone", bool(ok_mono), float(ok_mono), 1.0,
                            "distance non-increasing as the warp amplitude shrinks"))
    rep.checks.append(Check("deformation_ratio", spread <= opts.ratio_spread, spread, opts.ratio_spread,
                            "spread of distance/(|tau|_inf ||f||) around its median"))

    rng = np.random.default_rng([opts.seed, 7])
    pool = random_bandlimited(n, 2 * opts.num_pairs, opts.seed + 1)
    excess = -math.inf
    for k in range(opts.num_pairs):
        f, g = pool[2 * k], pool[2 * k + 1] * rng.uniform(0.2, 2.0)
        fd = feature_distance(scatter(f, net), scatter(g, net))
        xd = float(np.linalg.norm(f - g))
        rep.contraction.append((k, fd, xd))
        excess = max(excess, fd - xd)
    rep.checks.append(Check("contraction", excess <= opts.contraction_tol, excess, opts.contraction_tol,
                            "max of ||Phi f - Phi g|| - ||f - g||"))

    rep.energies = [layer_energies(b) for b in bases]
    mean = np.mean(np.array(rep.energies), axis=0)
    decreasing = bool(np.all(np.diff(mean[1:]) <= 0))
    total = float(np.max(np.sum(np.array(rep.energies), axis=1) / np.sum(signals**2, axis=1)))
    rep.checks.append(Check("energy_decay", decreasing, float(mean[-1] / mean[1]) if mean[1] > 0 else 0.0, 1.0,
                            "mean energy at depths >= 1 decreases with depth; value is last/first"))
    rep.checks.append(Check("energy_bounded", total <= 1 + 1e-6, total, 1.0,
                            "stride-weighted output energy over input energy"))
    return rep


def check_warp_grid(length: int, amplitudes, seed: int = 0) -> float:
    """Largest |d tau/dx| across the grid; must stay below 1/2."""
    base = smooth_displacement(length, seed)
    return max(max_warp_slope(Signal(a * base, 1.0)) for a in amplitudes)
