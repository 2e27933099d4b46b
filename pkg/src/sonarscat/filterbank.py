"""Morlet filter banks in the frequency domain.

Frequencies are in cycles per sample, so Nyquist is 0.5. Atoms are analytic
(zero on negative frequencies); the lowpass is a real, symmetric Gaussian.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .signal import Signal, write_binary

LN2 = math.log(2.0)


def default_scale_depth(signal_length: int) -> int:
    return max(1, int(round(math.log2(signal_length))) - 2)


def half_power_width(quality: int) -> float:
    """Relative Gaussian width sigma/xi at which neighbouring atoms cross at half power.

    Adjacent centers xi and xi*2^(-1/Q) with widths proportional to their
    centers meet at the harmonic mean of the two; requiring |g|^2 = 1/2 there
    gives this closed form.
    """
    ratio = 2.0 ** (-1.0 / quality)
    return (1.0 - ratio) / ((1.0 + ratio) * math.sqrt(LN2))


@dataclass(frozen=True)
class FilterBankSpec:
    quality: int
    max_scale_index: int | None
    signal_length: int
    center_frequency: float = 0.425
    bandwidth_param: float | None = None

    def __post_init__(self):
        n = self.signal_length
        if n < 2 or n & (n - 1):
            raise ValueError(f"signal_length must be a power of two, got {n}")
        if self.quality < 1:
            raise ValueError(f"quality must be >= 1, got {self.quality}")
        if self.max_scale_index is None:
            object.__setattr__(self, "max_scale_index", default_scale_depth(n))
        if self.max_scale_index < 1:
            raise ValueError(f"max_scale_index must be >= 1, got {self.max_scale_index}")
        if not 0.0 < self.center_frequency < 1.0:
            raise ValueError("center_frequency is a fraction of Nyquist in (0, 1)")
        if self.bandwidth_param is None:
            object.__setattr__(self, "bandwidth_param", half_power_width(self.quality))
        if self.bandwidth_param <= 0:
            raise ValueError("bandwidth_param must be positive")

    @property
    def num_atoms(self) -> int:
        return self.max_scale_index * self.quality

    @property
    def scale_indices(self) -> list[int]:
        """0 (finest) down to -(J*Q - 1) (coarsest)."""
        return [-k for k in range(self.num_atoms)]

    @property
    def sigma_floor(self) -> float:
        # one DFT bin; narrower Gaussians fall between bins
        return 1.0 / self.signal_length

    def center(self, j: int) -> float:
        return 0.5 * self.center_frequency * 2.0 ** (j / self.quality)

    def sigma(self, j: int) -> float:
        return max(self.bandwidth_param * self.center(j), self.sigma_floor)

    def lowpass_sigma(self) -> float:
        j = self.scale_indices[-1]
        xi, sig = self.center(j), self.sigma(j)
        # cross the coarsest atom at half power, as bandpass neighbours do
        s = (xi - math.sqrt(LN2) * sig) / math.sqrt(LN2)
        return max(s, self.sigma_floor)

    def to_dict(self) -> dict:
        return {
            "quality": self.quality,
            "max_scale_index": self.max_scale_index,
            "signal_length": self.signal_length,
            "center_frequency": self.center_frequency,
            "bandwidth_param": self.bandwidth_param,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FilterBankSpec":
        return cls(**d)


@dataclass(frozen=True)
class FilterBank:
    spec: FilterBankSpec | None
    scale_indices: tuple
    atoms: np.ndarray        # (num_atoms, N) frequency responses, fft ordering
    lowpass: np.ndarray      # (N,)
    centers: np.ndarray      # cycles/sample
    lowpass_sigma: float = 0.0
    gain: float = 1.0
    frame_lower: float = field(default=float("nan"))
    frame_upper: float = field(default=float("nan"))
    lowpass_sup: float = field(default=float("nan"))

    def __post_init__(self):
        if self.atoms.ndim != 2 or self.atoms.shape[1] != self.lowpass.size:
            raise ValueError("every atom must have the signal length")
        if math.isnan(self.frame_upper):
            a, b = littlewood_paley(self)
            object.__setattr__(self, "frame_lower", a)
            object.__setattr__(self, "frame_upper", b)
        if math.isnan(self.lowpass_sup):
            object.__setattr__(self, "lowpass_sup", float(np.max(np.abs(self.lowpass))))

    @property
    def signal_length(self) -> int:
        return self.lowpass.size

    def __len__(self):
        return self.atoms.shape[0]

    def atom(self, j: int) -> np.ndarray:
        return self.atoms[self.index_of(j)]

    def index_of(self, j: int) -> int:
        try:
            return self.scale_indices.index(j)
        except ValueError:
            raise ValueError(f"scale index {j} not in bank") from None

    def atom_list(self) -> list[tuple[int, np.ndarray]]:
        return list(zip(self.scale_indices, self.atoms))

    def to_descriptor(self) -> dict:
        return {
            "spec": None if self.spec is None else self.spec.to_dict(),
            "num_atoms": len(self),
            "scale_indices": list(self.scale_indices),
            "centers": [float(c) for c in self.centers],
            "lowpass_sigma": self.lowpass_sigma,
            "gain": self.gain,
            "frame_lower": self.frame_lower,
            "frame_upper": self.frame_upper,
            "lowpass_sup": self.lowpass_sup,
        }


def _check_j(spec: FilterBankSpec, j: int):
    if not (-spec.num_atoms < j <= 0):
        raise ValueError(f"scale index {j} outside ({-spec.num_atoms}, 0]")


def morlet_atom(spec: FilterBankSpec, j: int) -> np.ndarray:
    """Analytic Morlet atom at scale index ``j``, sampled on the DFT grid.

    A Gaussian bump at ``spec.center(j)`` minus a multiple of the Gaussian of
    the same width at the origin, so the DC bin (time-domain mean) is zero.
    """
    _check_j(spec, j)
    freqs = np.fft.fftfreq(spec.signal_length)
    xi, sig = spec.center(j), spec.sigma(j)
    bump = np.exp(-((freqs - xi) ** 2) / (2 * sig**2))
    base = np.exp(-(freqs**2) / (2 * sig**2))
    atom = bump - bump[0] * base
    atom[freqs < 0] = 0.0
    return atom.astype(np.complex128)


def gaussian_lowpass(length: int, sigma: float) -> np.ndarray:
    freqs = np.fft.fftfreq(length)
    return np.exp(-(freqs**2) / (2 * sigma**2)).astype(np.complex128)


def littlewood_paley_sum(atoms: np.ndarray, lowpass: np.ndarray) -> np.ndarray:
    """Per-bin frame energy seen by a real signal.

    A real input has |f(w)| = |f(-w)|, so each analytic atom contributes the
    symmetrised 0.5 * (|g(w)|^2 + |g(-w)|^2).
    """
    power = np.sum(np.abs(atoms) ** 2, axis=0)
    mirrored = np.roll(power[::-1], 1)
    return np.abs(lowpass) ** 2 + 0.5 * (power + mirrored)


def littlewood_paley(bank: FilterBank) -> tuple[float, float]:
    """Frame bound estimates (a, b) from the Littlewood-Paley sum.

    ``b`` is the maximum over all bins. ``a`` is the minimum over the band the
    bank tiles, |w| <= finest center; above it nothing is meant to respond.
    """
    lp = littlewood_paley_sum(bank.atoms, bank.lowpass)
    freqs = np.abs(np.fft.fftfreq(lp.size))
    top = float(np.max(bank.centers)) if len(bank.centers) else 0.5
    band = freqs <= top + 1e-15
    return float(np.min(lp[band])), float(np.max(lp))


def admissibility_level(b: float, lipschitz: float = 1.0, subsample: int = 1) -> float:
    """max{b, b gamma^2 / r}; must be <= 1 for a contractive layer."""
    return max(b, b * lipschitz**2 / subsample)


def normalize_bank(bank: FilterBank, lipschitz: float = 1.0, subsample: int = 1) -> FilterBank:
    """Scale atoms and lowpass by one constant so max{b, b gamma^2/r} = 1."""
    if lipschitz <= 0 or subsample < 1:
        raise ValueError("need lipschitz > 0 and subsample >= 1")
    level = admissibility_level(bank.frame_upper, lipschitz, subsample)
    if not level > 0:
        raise ValueError("degenerate bank: upper frame bound is zero")
    c = 1.0 / math.sqrt(level)
    out = scale_bank(bank, c)
    # rounding can leave the level a few ulps above one; step down until it is not
    while admissibility_level(littlewood_paley(out)[1], lipschitz, subsample) > 1.0:
        c = math.nextafter(c, 0.0)
        out = scale_bank(bank, c)
    return out


def scale_bank(bank: FilterBank, c: float) -> FilterBank:
    return replace(
        bank,
        atoms=bank.atoms * c,
        lowpass=bank.lowpass * c,
        gain=bank.gain * c,
        frame_lower=float("nan"),
        frame_upper=float("nan"),
        lowpass_sup=float("nan"),
    )


def build_bank(spec: FilterBankSpec, lipschitz: float = 1.0, subsample: int = 1,
               normalize: bool = True) -> FilterBank:
    js = spec.scale_indices
    atoms = np.stack([morlet_atom(spec, j) for j in js])
    sig = spec.lowpass_sigma()
    bank = FilterBank(
        spec=spec,
        scale_indices=tuple(js),
        atoms=atoms,
        lowpass=gaussian_lowpass(spec.signal_length, sig),
        centers=np.array([spec.center(j) for j in js]),
        lowpass_sigma=sig,
    )
    if normalize:
        bank = normalize_bank(bank, lipschitz, subsample)
    return bank


def save_descriptor(bank: FilterBank, path) -> None:
    Path(path).write_text(json.dumps(bank.to_descriptor(), indent=2))


def export_atoms(bank: FilterBank, directory) -> list[Path]:
    """Write each frequency response as two real signal files (real, imag)."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    items = list(zip((f"j{j}" for j in bank.scale_indices), bank.atoms))
    items.append(("lowpass", bank.lowpass))
    for name, arr in items:
        for part, values in (("re", arr.real), ("im", arr.imag)):
            p = out / f"atom_{name}_{part}.bin"
            # sample_rate slot carries the frequency grid length
            write_binary(Signal(values, float(arr.size)), p)
            written.append(p)
    return written
