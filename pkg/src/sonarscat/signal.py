"""Uniformly sampled real signals on a circular domain.

Every transform in the package treats a record as one period of a periodic
signal, so shifts, convolutions and warps wrap around the ends.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

MAGIC = b"SGNL"
_HEADER = struct.Struct("<4sId")


@dataclass(frozen=True)
class Signal:
    samples: np.ndarray
    sample_rate: float
    t0: float = 0.0

    def __post_init__(self):
        x = np.asarray(self.samples, dtype=np.float64)
        if x.ndim != 1 or x.size < 1:
            raise ValueError("samples must be a non-empty 1-D array")
        if not np.all(np.isfinite(x)):
            raise ValueError("samples must be finite")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValueError(f"sample_rate must be positive, got {self.sample_rate}")
        x.setflags(write=False)
        object.__setattr__(self, "samples", x)

    def __len__(self):
        return self.samples.size

    @property
    def dt(self) -> float:
        return 1.0 / self.sample_rate

    @property
    def energy(self) -> float:
        return float(np.dot(self.samples, self.samples))

    def times(self) -> np.ndarray:
        return self.t0 + np.arange(len(self)) * self.dt

    def with_samples(self, samples) -> "Signal":
        return Signal(samples, self.sample_rate, self.t0)


@dataclass(frozen=True)
class Spectrum:
    bins: np.ndarray
    bin_spacing: float

    def frequencies(self) -> np.ndarray:
        """Bin frequencies in Hz, numpy ``fftfreq`` ordering."""
        n = self.bins.size
        return np.fft.fftfreq(n, d=1.0 / (n * self.bin_spacing))


def dft(f: Signal) -> Spectrum:
    """Unitary DFT, so that ``norm(dft(f).bins) == norm(f.samples)``."""
    n = len(f)
    return Spectrum(np.fft.fft(f.samples, norm="ortho"), f.sample_rate / n)


def idft(spec: Spectrum, t0: float = 0.0) -> Signal:
    """Inverse of :func:`dft`; the imaginary residue of a real signal is dropped."""
    n = spec.bins.size
    x = np.fft.ifft(spec.bins, norm="ortho")
    return Signal(x.real, spec.bin_spacing * n, t0)


def _check_compatible(f: Signal, g: Signal):
    if len(f) != len(g):
        raise ValueError(f"length mismatch: {len(f)} vs {len(g)}")
    if not math.isclose(f.sample_rate, g.sample_rate, rel_tol=1e-12):
        raise ValueError("sample rate mismatch")


def circular_convolve(f: Signal, g: Signal) -> Signal:
    """(f * g)[n] = sum_k f[k] g[(n - k) mod N], computed through the FFT."""
    _check_compatible(f, g)
    out = np.fft.irfft(np.fft.rfft(f.samples) * np.fft.rfft(g.samples), n=len(f))
    return f.with_samples(out)


def translate(f: Signal, t: int) -> Signal:
    """T_t f[n] = f[n - t] with circular wrap; ``t`` in samples."""
    return f.with_samples(np.roll(f.samples, int(t)))


def trig_interpolate(x: np.ndarray, positions: np.ndarray, chunk: int = 256) -> np.ndarray:
    """Evaluate the band-limited periodic interpolant of ``x`` at fractional indices.

    The interpolant is the real trigonometric polynomial whose samples at the
    integers are ``x``; the Nyquist term (even length) uses ``cos(pi p)`` so
    the result is real for real input.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    positions = np.asarray(positions, dtype=np.float64)
    coeffs = np.fft.rfft(x) / n
    k = np.arange(coeffs.size)
    weights = np.full(coeffs.size, 2.0)
    weights[0] = 1.0
    if n % 2 == 0:
        weights[-1] = 1.0
    coeffs = coeffs * weights
    out = np.empty(positions.size)
    for start in range(0, positions.size, chunk):
        p = positions[start:start + chunk]
        phase = np.exp(2j * np.pi * np.outer(p, k) / n)
        if n % 2 == 0:
            phase[:, -1] = np.cos(np.pi * p)
        out[start:start + chunk] = (phase @ coeffs).real
    return out


def max_warp_slope(tau: Signal) -> float:
    """Largest |d tau / dx| by circular first differences (dimensionless)."""
    s = tau.samples
    return float(np.max(np.abs(np.roll(s, -1) - s)) * tau.sample_rate)


def warp(f: Signal, tau: Signal, max_slope: float = 1.0) -> Signal:
    """Return f(x - tau(x)) using band-limited interpolation.

    ``tau`` holds the displacement in seconds at each sample time. The
    derivative bound ``max |d tau/dx| < max_slope`` keeps x - tau(x) invertible.
    """
    _check_compatible(f, tau)
    slope = max_warp_slope(tau)
    if slope >= max_slope:
        raise ValueError(f"warp derivative {slope:.3g} violates bound {max_slope}")
    shift = tau.samples * f.sample_rate
    moving = shift != 0.0
    out = f.samples.copy()
    if np.any(moving):
        idx = np.nonzero(moving)[0]
        out[idx] = trig_interpolate(f.samples, idx - shift[idx])
    return f.with_samples(out)


def add_noise(f: Signal, snr_db: float, seed: int) -> Signal:
    """Add white Gaussian noise rescaled so the realised SNR is exactly ``snr_db``.

    ``snr_db = inf`` disables the noise and returns ``f`` unchanged.
    """
    if math.isinf(snr_db) and snr_db > 0:
        return f
    energy = f.energy
    if energy <= 0.0:
        raise ValueError("cannot set an SNR relative to a zero-energy signal")
    noise = np.random.default_rng(seed).standard_normal(len(f))
    target = energy * 10.0 ** (-snr_db / 10.0)
    noise *= math.sqrt(target / np.dot(noise, noise))
    return f.with_samples(f.samples + noise)


def snr_db(f: Signal, noisy: Signal) -> float:
    noise = noisy.samples - f.samples
    return 10.0 * math.log10(f.energy / float(np.dot(noise, noise)))


# -- serialization ------------------------------------------------------------

def write_csv(f: Signal, path) -> None:
    lines = [f"sample_rate,{f.sample_rate!r}"]
    lines.extend(repr(float(v)) for v in f.samples)
    Path(path).write_text("\n".join(lines) + "\n")


def read_csv(path) -> Signal:
    lines = Path(path).read_text().split()
    key, _, rate = lines[0].partition(",")
    if key != "sample_rate":
        raise ValueError(f"{path}: missing sample_rate header")
    return Signal(np.array([float(v) for v in lines[1:]]), float(rate))


def to_bytes(f: Signal) -> bytes:
    return _HEADER.pack(MAGIC, len(f), f.sample_rate) + f.samples.astype("<f8").tobytes()


def from_bytes(buf: bytes) -> Signal:
    if len(buf) < _HEADER.size:
        raise ValueError("truncated signal header")
    magic, n, rate = _HEADER.unpack_from(buf)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r}")
    body = buf[_HEADER.size:]
    if len(body) != 8 * n:
        raise ValueError(f"expected {n} samples, found {len(body) // 8}")
    return Signal(np.frombuffer(body, dtype="<f8").copy(), rate)


def write_binary(f: Signal, path) -> None:
    Path(path).write_bytes(to_bytes(f))


def read_binary(path) -> Signal:
    return from_bytes(Path(path).read_bytes())


def read_signal(path) -> Signal:
    path = Path(path)
    return read_csv(path) if path.suffix == ".csv" else read_binary(path)
