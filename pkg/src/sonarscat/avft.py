"""Absolute value of the Fourier transform, the shift-invariant baseline."""

import numpy as np

from .signal import Signal


def avft(f, log: bool = False, eps: float = 1e-12) -> np.ndarray:
    """Magnitude of the unitary DFT on the non-negative frequencies.

    Returns ``N // 2 + 1`` values. With ``log=True`` the magnitudes are
    compressed as ``log(eps + |F|)``.
    """
    x = f.samples if isinstance(f, Signal) else np.asarray(f, dtype=np.float64)
    mag = np.abs(np.fft.rfft(x, norm="ortho"))
    return np.log(eps + mag) if log else mag


def avft_batch(signals: np.ndarray, log: bool = False, eps: float = 1e-12) -> np.ndarray:
    mag = np.abs(np.fft.rfft(np.asarray(signals, dtype=np.float64), axis=-1, norm="ortho"))
    return np.log(eps + mag) if log else mag
