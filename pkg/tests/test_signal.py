import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sonarscat.signal import (Signal, add_noise, circular_convolve, dft, from_bytes, idft, read_binary,
                              read_csv, read_signal, snr_db, to_bytes, translate, warp, write_binary,
                              write_csv)

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)


def sig(x, fs=1.0):
    return Signal(np.asarray(x, dtype=float), fs)


def direct_dft(x):
    n = len(x)
    k = np.arange(n)
    return np.array([np.sum(x * np.exp(-2j * np.pi * m * k / n)) for m in range(n)]) / math.sqrt(n)


def direct_circular_convolution(f, g):
    n = len(f)
    return np.array([sum(f[k] * g[(i - k) % n] for k in range(n)) for i in range(n)])


class TestSignalType:
    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            Signal(np.array([]), 1.0)

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            Signal(np.array([1.0, np.nan]), 1.0)

    @pytest.mark.parametrize("fs", [0.0, -1.0, math.inf])
    def test_rejects_bad_rate(self, fs):
        with pytest.raises(ValueError):
            Signal(np.ones(4), fs)

    def test_samples_are_read_only(self):
        s = sig([1, 2, 3])
        with pytest.raises(ValueError):
            s.samples[0] = 5


class TestDft:
    def test_constant_puts_energy_in_dc(self):
        spec = dft(sig(np.ones(8)))
        assert abs(spec.bins[0]) == pytest.approx(math.sqrt(8))
        assert np.allclose(spec.bins[1:], 0, atol=1e-12)

    def test_impulse_is_flat(self):
        x = np.zeros(16)
        x[0] = 1
        assert np.allclose(np.abs(dft(sig(x)).bins), 1 / 4)

    def test_cosine_hits_plus_minus_k(self):
        n, k = 16, 3
        x = np.cos(2 * np.pi * k * np.arange(n) / n)
        bins = dft(sig(x)).bins
        oracle = direct_dft(x)
        assert np.allclose(bins, oracle, atol=1e-12)
        big = set(np.flatnonzero(np.abs(bins) > 1e-9))
        assert big == {k, n - k}

    def test_bin_spacing_and_frequencies(self):
        spec = dft(sig(np.ones(8), fs=800.0))
        assert spec.bin_spacing == 100.0
        assert spec.frequencies()[1] == pytest.approx(100.0)

    @given(arrays(np.float64, st.integers(1, 64), elements=finite))
    def test_round_trip(self, x):
        back = idft(dft(sig(x)))
        assert np.allclose(back.samples, x, atol=1e-9 * (1 + np.abs(x).max()))

    @pytest.mark.parametrize("n", [1, 7, 256, 2**16])
    def test_parseval(self, n):
        x = np.random.default_rng(n).standard_normal(n)
        assert np.linalg.norm(dft(sig(x)).bins) == pytest.approx(np.linalg.norm(x), rel=1e-10)


class TestConvolution:
    def test_delta_is_identity(self):
        f = np.random.default_rng(0).standard_normal(32)
        d = np.zeros(32)
        d[0] = 1
        assert np.allclose(circular_convolve(sig(f), sig(d)).samples, f, atol=1e-12)

    def test_ones_with_ones(self):
        n = 12
        out = circular_convolve(sig(np.ones(n)), sig(np.ones(n))).samples
        assert np.allclose(out, n)

    def test_matches_direct_summation(self):
        rng = np.random.default_rng(1)
        f, g = rng.standard_normal(32), rng.standard_normal(32)
        got = circular_convolve(sig(f), sig(g)).samples
        want = direct_circular_convolution(f, g)
        assert np.linalg.norm(got - want) <= 1e-10 * np.linalg.norm(want)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            circular_convolve(sig(np.ones(4)), sig(np.ones(5)))

    def test_rate_mismatch(self):
        with pytest.raises(ValueError):
            circular_convolve(sig(np.ones(4), 1.0), sig(np.ones(4), 2.0))

    @given(arrays(np.float64, 24, elements=finite), arrays(np.float64, 24, elements=finite))
    def test_commutes(self, f, g):
        a = circular_convolve(sig(f), sig(g)).samples
        b = circular_convolve(sig(g), sig(f)).samples
        assert np.allclose(a, b, atol=1e-8 * (1 + np.abs(a).max()))

    @given(arrays(np.float64, 24, elements=finite), arrays(np.float64, 24, elements=finite),
           st.integers(-100, 100))
    def test_commutes_with_translation(self, f, g, t):
        a = circular_convolve(translate(sig(f), t), sig(g)).samples
        b = translate(circular_convolve(sig(f), sig(g)), t).samples
        assert np.allclose(a, b, atol=1e-10 * (1 + np.abs(b).max()))


class TestTranslate:
    def test_zero_shift(self):
        f = sig(np.arange(5.0))
        assert np.array_equal(translate(f, 0).samples, f.samples)

    def test_impulse_moves(self):
        x = np.zeros(8)
        x[3] = 1
        assert np.flatnonzero(translate(sig(x), 2).samples).tolist() == [5]

    @given(arrays(np.float64, st.integers(1, 40), elements=finite), st.integers(-500, 500))
    def test_inverse(self, x, a):
        f = sig(x)
        assert np.array_equal(translate(translate(f, a), -a).samples, x)


class TestWarp:
    def setup_method(self):
        n = 128
        self.n = n
        self.x = np.arange(n)
        self.f = sig(np.sin(2 * np.pi * self.x / n) + 0.5 * np.cos(2 * np.pi * 2 * self.x / n), fs=100.0)

    def test_zero_tau(self):
        out = warp(self.f, sig(np.zeros(self.n), 100.0))
        assert np.array_equal(out.samples, self.f.samples)

    @pytest.mark.parametrize("c", [-3, 1, 7])
    def test_integer_constant_is_translation(self, c):
        tau = sig(np.full(self.n, c / 100.0), 100.0)
        assert np.allclose(warp(self.f, tau).samples, translate(self.f, c).samples, atol=1e-8)

    def test_gaussian_bump_matches_oversampled_oracle(self):
        n, fs = self.n, 100.0
        bump = 0.8 * np.exp(-((self.x - n / 2) ** 2) / (2 * 12.0**2))    # samples
        tau = sig(bump / fs, fs)
        got = warp(self.f, tau).samples
        # oracle: the underlying smooth function on a 64x grid, linearly interpolated
        fine = np.arange(64 * n) / 64
        dense = np.sin(2 * np.pi * fine / n) + 0.5 * np.cos(2 * np.pi * 2 * fine / n)
        want = np.interp((self.x - bump) % n, fine, dense, period=n)
        assert np.max(np.abs(got - want)) < 1e-6

    def test_rejects_steep_tau(self):
        tau = sig(np.where(self.x % 2 == 0, 0.0, 1.0 / 100.0), 100.0)
        with pytest.raises(ValueError):
            warp(self.f, tau)

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            warp(self.f, sig(np.zeros(self.n - 1), 100.0))


class TestNoise:
    def test_infinite_snr_is_identity(self):
        f = sig(np.ones(10))
        assert add_noise(f, math.inf, 0) is f

    def test_zero_db_on_unit_energy(self):
        x = np.zeros(64)
        x[5] = 1
        f = sig(x)
        n = add_noise(f, 0.0, 3).samples - x
        assert np.dot(n, n) == pytest.approx(1.0, abs=1e-6)

    def test_five_db_ratio(self):
        f = sig(np.random.default_rng(0).standard_normal(256))
        n = add_noise(f, 5.0, 1).samples - f.samples
        assert np.dot(n, n) / f.energy == pytest.approx(10**-0.5, abs=1e-6)

    def test_zero_energy_rejected(self):
        with pytest.raises(ValueError):
            add_noise(sig(np.zeros(8)), 5.0, 0)

    def test_deterministic_per_seed(self):
        f = sig(np.ones(32))
        assert np.array_equal(add_noise(f, 3, 9).samples, add_noise(f, 3, 9).samples)
        assert not np.array_equal(add_noise(f, 3, 9).samples, add_noise(f, 3, 10).samples)

    @settings(max_examples=50)
    @given(arrays(np.float64, st.integers(2, 200), elements=finite), st.floats(-20, 40), st.integers(0, 2**31))
    def test_hits_requested_snr(self, x, target, seed):
        if np.dot(x, x) < 1e-6:
            return
        f = sig(x)
        assert abs(snr_db(f, add_noise(f, target, seed)) - target) < 0.1


class TestSerialization:
    def test_csv_round_trip(self, tmp_path):
        f = Signal(np.random.default_rng(2).standard_normal(50), 1234.5)
        write_csv(f, tmp_path / "s.csv")
        text = (tmp_path / "s.csv").read_text().splitlines()
        assert text[0] == "sample_rate,1234.5"
        assert len(text) == 51
        g = read_csv(tmp_path / "s.csv")
        assert np.array_equal(g.samples, f.samples) and g.sample_rate == f.sample_rate

    def test_binary_layout(self, tmp_path):
        f = Signal(np.array([1.0, -2.5]), 8000.0)
        buf = to_bytes(f)
        assert len(buf) == 16 + 16
        assert buf[:4] == b"SGNL"
        assert int.from_bytes(buf[4:8], "little") == 2
        assert np.frombuffer(buf[8:16], "<f8")[0] == 8000.0
        write_binary(f, tmp_path / "s.sgnl")
        g = read_binary(tmp_path / "s.sgnl")
        assert np.array_equal(g.samples, f.samples) and g.sample_rate == 8000.0

    def test_read_signal_dispatch(self, tmp_path):
        f = sig([1.0, 2.0, 3.0], 10.0)
        write_csv(f, tmp_path / "a.csv")
        write_binary(f, tmp_path / "a.bin")
        assert np.array_equal(read_signal(tmp_path / "a.csv").samples, read_signal(tmp_path / "a.bin").samples)

    @pytest.mark.parametrize("buf", [b"SG", b"XXXX" + bytes(12), to_bytes(sig([1.0, 2.0]))[:-3]])
    def test_corrupt_binary(self, buf):
        with pytest.raises(ValueError):
            from_bytes(buf)

    def test_csv_missing_header(self, tmp_path):
        (tmp_path / "bad.csv").write_text("1.0\n2.0\n")
        with pytest.raises(ValueError):
            read_csv(tmp_path / "bad.csv")
