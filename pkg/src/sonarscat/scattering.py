"""Layered scattering cascade with modulus nonlinearity and strided outputs.

Depth m coefficients are ``phi_m * u[q] f`` for paths q of length m, where
``u[q]`` chains |x * g| and striding by r. The output lowpass of depth m is the
lowpass of the frame that would propagate depth m (bank m+1); the last depth
reuses its own bank's lowpass, resampled to the strided length. With this
pairing each frame splits energy between its atoms and its lowpass, which is
what makes the whole cascade a contraction when every bank has b <= 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .filterbank import FilterBank, FilterBankSpec, build_bank, gaussian_lowpass, scale_bank
from .signal import Signal, max_warp_slope, translate, warp

PATH_RULES = ("increasing_scale", "all")
# |gaussian| drops below 1e-3 of its peak past this many sigmas
_LOWPASS_EXTENT = math.sqrt(2 * math.log(1e3))


def _is_pow2(n: int) -> bool:
    return n >= 1 and not (n & (n - 1))


@dataclass(frozen=True)
class ScatteringConfig:
    layers: tuple            # ((FilterBankSpec, r), ...)
    path_rule: str = "increasing_scale"
    output_stride: int | None = None
    lipschitz: float = 1.0
    normalize: bool = True
    gain: float = 1.0        # extra bank gain; diagnostics use it as a negative control

    def __post_init__(self):
        layers = tuple((spec, int(r)) for spec, r in self.layers)
        object.__setattr__(self, "layers", layers)
        if not layers:
            raise ValueError("need at least one layer")
        if self.path_rule not in PATH_RULES:
            raise ValueError(f"path_rule must be one of {PATH_RULES}")
        length = layers[0][0].signal_length
        for m, (spec, r) in enumerate(layers, start=1):
            if r < 1 or not _is_pow2(r):
                raise ValueError(f"layer {m}: subsample rate must be a power of two >= 1")
            if spec.signal_length != length:
                raise ValueError(f"layer {m}: bank length {spec.signal_length}, expected {length}")
            if length % r:
                raise ValueError(f"layer {m}: rate {r} does not divide {length}")
            length //= r
        if self.output_stride is not None:
            os_ = self.output_stride
            if not _is_pow2(os_) or length % os_:
                raise ValueError(f"output_stride {os_} must be a power of two dividing {length}")

    @property
    def signal_length(self) -> int:
        return self.layers[0][0].signal_length

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def rates(self) -> tuple:
        return tuple(r for _, r in self.layers)

    @classmethod
    def from_qualities(cls, signal_length: int, qualities, scales=None, subsample=None,
                       center_frequency: float = 0.425, **kw) -> "ScatteringConfig":
        """Chain banks of the given qualities, deriving each layer's input length."""
        qualities = list(qualities)
        scales = list(scales) if scales is not None else [None] * len(qualities)
        subsample = list(subsample) if subsample is not None else [1] * len(qualities)
        if not len(qualities) == len(scales) == len(subsample):
            raise ValueError("qualities, scales and subsample must have equal lengths")
        layers, n = [], signal_length
        for q, j, r in zip(qualities, scales, subsample):
            layers.append((FilterBankSpec(q, j, n, center_frequency), r))
            if n % r:
                raise ValueError(f"rate {r} does not divide length {n}")
            n //= r
        return cls(tuple(layers), **kw)

    def to_dict(self) -> dict:
        return {
            "layers": [{"bank": s.to_dict(), "subsample": r} for s, r in self.layers],
            "path_rule": self.path_rule,
            "output_stride": self.output_stride,
            "lipschitz": self.lipschitz,
            "normalize": self.normalize,
            "gain": self.gain,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ScatteringConfig":
        layers = tuple((FilterBankSpec.from_dict(l["bank"]), l["subsample"]) for l in d["layers"])
        rest = {k: d[k] for k in ("path_rule", "output_stride", "lipschitz", "normalize", "gain") if k in d}
        return cls(layers, **rest)


@dataclass(frozen=True)
class Network:
    config: ScatteringConfig
    banks: tuple                   # FilterBank per layer
    output_filters: tuple          # real half-spectrum per depth 0..M
    output_sigmas: tuple
    output_stride: int
    paths: tuple                   # per depth 1..M: tuple of paths (tuples of scale indices)
    parents: tuple                 # per depth 1..M: (parent row, atom row) int arrays
    lowpass_sup: float

    @property
    def depth(self) -> int:
        return len(self.banks)

    def input_length(self, m: int) -> int:
        """Length of depth-m arrays u[q] (m = 0 is the input)."""
        n = self.config.signal_length
        for r in self.config.rates[:m]:
            n //= r
        return n

    def cumulative_rate(self, m: int) -> int:
        return int(np.prod(self.config.rates[:m], dtype=np.int64)) if m else 1

    def output_length(self, m: int) -> int:
        return self.input_length(m) // self.output_stride

    def absolute_centers(self, m: int) -> np.ndarray:
        """Bank-m atom centers in cycles per input sample (m counted from 1)."""
        return self.banks[m - 1].centers / self.cumulative_rate(m - 1)


def _critical_stride(sigma: float) -> int:
    c = 1.0 / (2.0 * _LOWPASS_EXTENT * sigma)
    return 1 << max(0, int(math.floor(math.log2(c)))) if c >= 1 else 1


@lru_cache(maxsize=32)
def build_network(cfg: ScatteringConfig) -> Network:
    banks = []
    for spec, r in cfg.layers:
        bank = build_bank(spec, cfg.lipschitz, r, normalize=cfg.normalize)
        if cfg.gain != 1.0:
            bank = scale_bank(bank, cfg.gain)
        banks.append(bank)

    filters, sigmas = [], []
    for m in range(cfg.depth + 1):
        if m < cfg.depth:
            lp, sig = banks[m].lowpass.real, banks[m].lowpass_sigma
        else:
            last, r = banks[-1], cfg.rates[-1]
            n = last.signal_length // r
            sig = min(last.lowpass_sigma * r, 0.5)
            lp = gaussian_lowpass(n, sig).real * last.gain
        filters.append(np.ascontiguousarray(lp[: lp.size // 2 + 1]))
        sigmas.append(sig)

    final_len = cfg.signal_length // int(np.prod(cfg.rates))
    if cfg.output_stride is None:
        os_ = min(_critical_stride(s) for s in sigmas)
        os_ = min(os_, final_len)
    else:
        os_ = cfg.output_stride

    paths, parents = [], []
    prev_paths = [()]
    prev_last_center = [math.inf]
    rate = 1
    for m, bank in enumerate(banks, start=1):
        centers = bank.centers / rate
        cur_paths, cur_centers, prow, arow = [], [], [], []
        for p, (path, last_c) in enumerate(zip(prev_paths, prev_last_center)):
            for k, (j, c) in enumerate(zip(bank.scale_indices, centers)):
                if cfg.path_rule == "increasing_scale" and not c < last_c:
                    continue
                cur_paths.append(path + (j,))
                cur_centers.append(c)
                prow.append(p)
                arow.append(k)
        paths.append(tuple(cur_paths))
        parents.append((np.array(prow, dtype=np.int64), np.array(arow, dtype=np.int64)))
        prev_paths, prev_last_center = cur_paths, cur_centers
        rate *= cfg.rates[m - 1]

    sup = max(float(np.max(np.abs(f))) for f in filters[1:])
    return Network(cfg, tuple(banks), tuple(filters), tuple(sigmas), os_,
                   tuple(paths), tuple(parents), sup)


@dataclass
class ScatteringFeatures:
    layer0: np.ndarray                       # (T0,)
    layers: list = field(default_factory=list)   # per depth m>=1: (P_m, T_m) array
    paths: list = field(default_factory=list)    # per depth m>=1: list of paths
    strides: list = field(default_factory=list)  # input samples per output sample, depth 0..M

    @property
    def depth(self) -> int:
        return len(self.layers)

    def layer(self, m: int) -> np.ndarray:
        """Depth-m coefficients as a 2-D (paths, time) array; depth 0 has one row."""
        return self.layer0[None, :] if m == 0 else self.layers[m - 1]

    def coefficients(self, m: int) -> dict:
        if m == 0:
            return {(): self.layer0}
        return dict(zip(self.paths[m - 1], self.layers[m - 1]))

    def lookup(self, layer: int, path: tuple, time: int) -> float:
        if layer == 0:
            return float(self.layer0[time])
        row = self.paths[layer - 1].index(tuple(path))
        return float(self.layers[layer - 1][row, time])


def _fold_ifft(spectra: np.ndarray, stride: int) -> np.ndarray:
    """ifft followed by keeping every ``stride``-th sample, via spectral aliasing."""
    if stride == 1:
        return np.fft.ifft(spectra, axis=-1)
    p, n = spectra.shape
    folded = spectra.reshape(p, stride, n // stride).sum(axis=1) / stride
    return np.fft.ifft(folded, axis=-1)


def _lowpass_output(u: np.ndarray, half_filter: np.ndarray, stride: int) -> np.ndarray:
    n = u.shape[-1]
    spec = np.fft.rfft(u, axis=-1) * half_filter
    if stride == 1:
        return np.fft.irfft(spec, n=n, axis=-1)
    full = np.concatenate([spec, np.conj(spec[:, 1:(n + 1) // 2][:, ::-1])], axis=1)
    return _fold_ifft(full, stride).real


def propagate(f: Signal, bank: FilterBank, lam: int, r: int = 1) -> Signal:
    """|f * g_lam| sampled every ``r`` samples."""
    if len(f) != bank.signal_length:
        raise ValueError(f"signal length {len(f)} does not match bank {bank.signal_length}")
    if r < 1 or len(f) % r:
        raise ValueError(f"rate {r} does not divide length {len(f)}")
    atom = bank.atom(lam)
    spec = np.fft.fft(f.samples) * atom
    out = np.abs(_fold_ifft(spec[None, :], r))[0]
    return Signal(out, f.sample_rate / r, f.t0)


def lowpass(f: Signal, half_filter: np.ndarray, stride: int = 1) -> np.ndarray:
    return _lowpass_output(f.samples[None, :], half_filter, stride)[0]


def _as_network(cfg) -> Network:
    return cfg if isinstance(cfg, Network) else build_network(cfg)


def scatter(f, cfg, chunk: int = 256) -> ScatteringFeatures:
    """Scattering coefficients of ``f`` (a Signal or 1-D array) for ``cfg``."""
    net = _as_network(cfg)
    x = f.samples if isinstance(f, Signal) else np.asarray(f, dtype=np.float64)
    if x.size != net.config.signal_length:
        raise ValueError(f"signal length {x.size} does not match configured {net.config.signal_length}")
    os_ = net.output_stride
    feats = ScatteringFeatures(layer0=_lowpass_output(x[None, :], net.output_filters[0], os_)[0])
    feats.strides.append(os_)
    u = x[None, :]
    for m, bank in enumerate(net.banks, start=1):
        r = net.config.rates[m - 1]
        prow, arow = net.parents[m - 1]
        spectra = np.fft.fft(u, axis=-1)
        nxt = np.empty((prow.size, u.shape[1] // r))
        for s in range(0, prow.size, chunk):
            sl = slice(s, s + chunk)
            nxt[sl] = np.abs(_fold_ifft(spectra[prow[sl]] * bank.atoms[arow[sl]], r))
        u = nxt
        out = np.empty((u.shape[0], u.shape[1] // os_))
        for s in range(0, u.shape[0], chunk):
            out[s:s + chunk] = _lowpass_output(u[s:s + chunk], net.output_filters[m], os_)
        feats.layers.append(out)
        feats.paths.append(list(net.paths[m - 1]))
        feats.strides.append(net.cumulative_rate(m) * os_)
    return feats


def flatten(sf: ScatteringFeatures) -> tuple[np.ndarray, list]:
    """Concatenate depth by depth, path by path (finest atom first), then time.

    The legend entry for each position is ``(layer, path, time)``.
    """
    parts, legend = [sf.layer0], [(0, (), t) for t in range(sf.layer0.size)]
    for m in range(1, sf.depth + 1):
        arr = sf.layers[m - 1]
        parts.append(arr.ravel())
        legend.extend((m, p, t) for p in sf.paths[m - 1] for t in range(arr.shape[1]))
    return np.concatenate(parts), legend


def feature_size(cfg) -> int:
    net = _as_network(cfg)
    total = net.output_length(0)
    for m in range(1, net.depth + 1):
        total += len(net.paths[m - 1]) * net.output_length(m)
    return total


def layer_energies(sf: ScatteringFeatures) -> list[float]:
    """Squared norm per depth, scaled by the output stride to input-rate energy."""
    return [float(np.sum(sf.layer(m) ** 2)) * sf.strides[m] for m in range(sf.depth + 1)]


def feature_distance(a: ScatteringFeatures, b: ScatteringFeatures) -> float:
    """Plain l2 distance between the full coefficient sets (all depths)."""
    return math.sqrt(sum(float(np.sum((a.layer(m) - b.layer(m)) ** 2)) for m in range(a.depth + 1)))


def _layer_drifts(a: ScatteringFeatures, b: ScatteringFeatures) -> list[float]:
    return [float(np.linalg.norm(a.layer(m) - b.layer(m))) for m in range(1, a.depth + 1)]


def _signal(f) -> Signal:
    return f if isinstance(f, Signal) else Signal(f, 1.0)


def total_stride(cfg) -> int:
    net = _as_network(cfg)
    return net.cumulative_rate(net.depth) * net.output_stride


def translation_covariance_defect(f, cfg, t: int, base: ScatteringFeatures | None = None) -> float:
    """max over depths of ||Phi_m[T_t f] - T_{t/stride_m} Phi_m[f]|| / ||f||.

    ``t`` must be a multiple of the total stride so every shift lands on the
    output grid. ``base`` may carry the already computed features of ``f``.
    """
    net = _as_network(cfg)
    f = _signal(f)
    step = total_stride(net)
    if t % step:
        raise ValueError(f"shift {t} is not a multiple of the total stride {step}")
    base = scatter(f, net) if base is None else base
    moved = scatter(translate(f, t), net)
    norm = math.sqrt(f.energy)
    defect = 0.0
    for m in range(net.depth + 1):
        shift = t // (net.cumulative_rate(m) * net.output_stride)
        expected = np.roll(base.layer(m), shift, axis=1)
        defect = max(defect, float(np.linalg.norm(moved.layer(m) - expected)) / norm)
    return defect


def translation_bound(t: float, lowpass_sup: float, rates, signal_norm: float) -> float:
    """2 pi |t| K / (r_1 ... r_M) * ||f||."""
    return 2 * math.pi * abs(t) * lowpass_sup / float(np.prod(rates)) * signal_norm


def translation_sensitivity(f, cfg, t: int, base: ScatteringFeatures | None = None) -> tuple[float, float]:
    """(measured drift summed over depths >= 1, theoretical bound)."""
    net = _as_network(cfg)
    f = _signal(f)
    base = scatter(f, net) if base is None else base
    measured = sum(_layer_drifts(scatter(translate(f, t), net), base))
    bound = translation_bound(t, net.lowpass_sup, net.config.rates, math.sqrt(f.energy))
    return measured, bound


def deformation_sensitivity(f, cfg, tau: Signal, base: ScatteringFeatures | None = None) -> float:
    """Summed per-depth distance between Phi[f(x - tau(x))] and Phi[f], depths >= 1."""
    net = _as_network(cfg)
    f = _signal(f)
    slope = max_warp_slope(tau)
    if slope > 0.5:
        raise ValueError(f"|d tau/dx| = {slope:.3g} exceeds 1/2")
    base = scatter(f, net) if base is None else base
    return sum(_layer_drifts(scatter(warp(f, tau), net), base))


# -- serialization ------------------------------------------------------------

def features_index(sf: ScatteringFeatures) -> dict:
    return {
        "depth": sf.depth,
        "strides": list(sf.strides),
        "layer0_length": int(sf.layer0.size),
        "layers": [
            {"paths": [list(p) for p in sf.paths[m]], "length": int(sf.layers[m].shape[1])}
            for m in range(sf.depth)
        ],
    }


def save_features(sf: ScatteringFeatures, stem) -> None:
    """Write ``<stem>.json`` (index) and ``<stem>.bin`` (flattened coefficients)."""
    import json
    from pathlib import Path

    from .signal import write_binary

    stem = Path(stem)
    vec, _ = flatten(sf)
    stem.with_suffix(".json").write_text(json.dumps(features_index(sf), indent=1))
    write_binary(Signal(vec, 1.0 / sf.strides[0]), stem.with_suffix(".bin"))


def load_features(stem) -> ScatteringFeatures:
    import json
    from pathlib import Path

    from .signal import read_binary

    stem = Path(stem)
    idx = json.loads(stem.with_suffix(".json").read_text())
    vec = read_binary(stem.with_suffix(".bin")).samples
    n0 = idx["layer0_length"]
    sf = ScatteringFeatures(layer0=vec[:n0].copy(), strides=list(idx["strides"]))
    pos = n0
    for layer in idx["layers"]:
        paths = [tuple(p) for p in layer["paths"]]
        size = len(paths) * layer["length"]
        sf.layers.append(vec[pos:pos + size].reshape(len(paths), layer["length"]).copy())
        sf.paths.append(paths)
        pos += size
    return sf


def features_csv_row(vec: np.ndarray) -> str:
    return ",".join(repr(float(v)) for v in vec)
