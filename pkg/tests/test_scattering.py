import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sonarscat.diagnostics import random_bandlimited, smooth_displacement
from sonarscat.echo import EchoScene, default_pulse, synthesize
from sonarscat.filterbank import FilterBankSpec
from sonarscat.scattering import (ScatteringConfig, build_network, deformation_sensitivity, feature_distance,
                                  feature_size, features_csv_row, flatten, layer_energies, load_features,
                                  lowpass, propagate, save_features, scatter, total_stride,
                                  translation_bound, translation_covariance_defect, translation_sensitivity)
from sonarscat.signal import Signal, translate

N = 256


def cfg_of(qualities=(1, 1), scales=None, subsample=None, n=N, **kw):
    return ScatteringConfig.from_qualities(n, qualities, scales, subsample, **kw)


@pytest.fixture(scope="module")
def signals():
    return random_bandlimited(N, 6, seed=3)


class TestConfig:
    def test_needs_layers(self):
        with pytest.raises(ValueError):
            ScatteringConfig(())

    def test_rate_must_divide(self):
        with pytest.raises(ValueError):
            ScatteringConfig(((FilterBankSpec(1, 3, 8), 16),))

    def test_rate_power_of_two(self):
        with pytest.raises(ValueError):
            cfg_of((1,), subsample=(3,))

    def test_bad_output_stride(self):
        with pytest.raises(ValueError):
            cfg_of((1,), output_stride=3)

    def test_bad_path_rule(self):
        with pytest.raises(ValueError):
            cfg_of((1,), path_rule="random")

    def test_layer_lengths_chain(self):
        cfg = cfg_of((2, 2, 1), subsample=(2, 4, 1))
        assert [s.signal_length for s, _ in cfg.layers] == [256, 128, 32]

    def test_dict_round_trip(self):
        cfg = cfg_of((4, 1), (5, 3), (2, 1), output_stride=8)
        assert ScatteringConfig.from_dict(cfg.to_dict()) == cfg


class TestPropagate:
    def test_zero(self):
        bank = build_network(cfg_of((1,))).banks[0]
        assert np.all(propagate(Signal(np.zeros(N), 1.0), bank, -1).samples == 0)

    def test_tone_has_flat_envelope(self):
        bank = build_network(cfg_of((4,))).banks[0]
        j = -5
        k = round(bank.centers[bank.index_of(j)] * N)
        tone = np.cos(2 * np.pi * k * np.arange(N) / N)
        env = propagate(Signal(tone, 1.0), bank, j).samples
        assert env.std() / env.mean() < 0.05

    def test_stride_takes_every_other(self, signals):
        bank = build_network(cfg_of((1,))).banks[0]
        f = Signal(signals[0], 1.0)
        full = propagate(f, bank, -2, 1).samples
        half = propagate(f, bank, -2, 2).samples
        assert half.size == N // 2
        assert np.allclose(half, full[::2], atol=1e-12)

    def test_errors(self):
        bank = build_network(cfg_of((1,))).banks[0]
        with pytest.raises(ValueError):
            propagate(Signal(np.zeros(N), 1.0), bank, 3)
        with pytest.raises(ValueError):
            propagate(Signal(np.zeros(N), 1.0), bank, 0, 3)
        with pytest.raises(ValueError):
            propagate(Signal(np.zeros(N // 2), 1.0), bank, 0)


class TestScatter:
    def test_zero_signal(self):
        sf = scatter(np.zeros(N), cfg_of((1, 1, 1)))
        assert all(np.all(sf.layer(m) == 0) for m in range(4))

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            scatter(np.zeros(N + 2), cfg_of((1,)))

    def test_impulse_matches_composed_ops(self):
        net = build_network(cfg_of((2, 1)))
        x = np.zeros(N)
        x[0] = 1
        sf = scatter(x, net)
        f = Signal(x, 1.0)
        os_ = net.output_stride
        for path, coeffs in sf.coefficients(1).items():
            u = propagate(f, net.banks[0], path[0])
            assert np.allclose(coeffs, lowpass(u, net.output_filters[1], os_), atol=1e-10)
        for path, coeffs in list(sf.coefficients(2).items())[:10]:
            u = propagate(propagate(f, net.banks[0], path[0]), net.banks[1], path[1])
            assert np.allclose(coeffs, lowpass(u, net.output_filters[2], os_), atol=1e-10)
        assert np.allclose(sf.layer0, lowpass(f, net.output_filters[0], os_), atol=1e-12)

    def test_increasing_scale_count(self):
        net = build_network(cfg_of((1, 1, 1), (4, 4, 4)))
        assert len(net.paths[2]) == math.comb(4, 3) == 4
        assert len(net.paths[1]) == math.comb(4, 2)

    def test_all_rule_count(self):
        net = build_network(cfg_of((1, 1), (4, 3), path_rule="all"))
        assert len(net.paths[1]) == 4 * 3

    @pytest.mark.parametrize("rates", [(1, 1, 1), (2, 1, 1), (2, 2, 1)])
    def test_paths_decrease_in_frequency(self, rates):
        net = build_network(cfg_of((2, 2, 1), subsample=rates))
        lookup = [dict(zip(b.scale_indices, net.absolute_centers(m + 1))) for m, b in enumerate(net.banks)]
        for m, paths in enumerate(net.paths, start=1):
            for p in paths:
                freqs = [lookup[k][j] for k, j in enumerate(p)]
                assert all(a > b for a, b in zip(freqs, freqs[1:]))
                assert len(p) == m

    def test_layer_shapes_and_sign(self, signals):
        cfg = cfg_of((2, 2, 1), subsample=(2, 2, 1))
        net = build_network(cfg)
        sf = scatter(signals[0], net)
        for m in range(1, 4):
            assert sf.layer(m).shape[1] == N // (net.cumulative_rate(m) * net.output_stride)
            assert np.all(sf.layer(m) >= 0)
        assert feature_size(net) == flatten(sf)[0].size

    def test_layer0_may_be_signed(self, signals):
        sf = scatter(signals[0], cfg_of((1,), output_stride=1))
        assert sf.layer0.min() < 0 < sf.layer0.max()


class TestFlatten:
    def test_empty_layer_three(self, signals):
        # J = 2 per layer: no strictly decreasing triple exists
        sf = scatter(signals[0], cfg_of((1, 1, 1), (2, 2, 2)))
        assert len(sf.paths[2]) == 0
        vec, legend = flatten(sf)
        assert {m for m, _, _ in legend} == {0, 1, 2}
        assert vec.size == sf.layer0.size + sf.layer(1).size + sf.layer(2).size

    def test_deterministic(self, signals):
        cfg = cfg_of((2, 1))
        a, b = flatten(scatter(signals[1], cfg)), flatten(scatter(signals[1], cfg))
        assert np.array_equal(a[0], b[0]) and a[1] == b[1]

    def test_legend_round_trip(self, signals):
        sf = scatter(signals[2], cfg_of((2, 2, 1), output_stride=4))
        vec, legend = flatten(sf)
        rng = np.random.default_rng(0)
        for i in rng.integers(0, vec.size, 100):
            layer, path, t = legend[i]
            assert sf.lookup(layer, path, t) == vec[i]

    def test_ordering(self, signals):
        _, legend = flatten(scatter(signals[0], cfg_of((1, 1))))
        layers = [m for m, _, _ in legend]
        assert layers == sorted(layers)


class TestEnergies:
    def test_zero(self):
        assert layer_energies(scatter(np.zeros(N), cfg_of((1, 1, 1)))) == [0.0] * 4

    def test_pulse_energy_decays(self):
        # lowpass scale 2^5 samples matches the pulse support
        pulse = default_pulse(50_000.0)
        x = np.zeros(1024)
        x[100:100 + len(pulse)] = pulse.samples
        e = layer_energies(scatter(x, cfg_of((1, 1, 1), (5, 5, 5), n=1024)))
        assert e[1] > e[2] > e[3]

    def test_noisy_echo_energy_decays_at_defaults(self):
        pulse = default_pulse(50_000.0)
        recs = synthesize(EchoScene(num_positions=3), pulse, 8192, 5.0, seed=0, normalize=True)
        net = build_network(cfg_of((1, 1, 1), n=8192))
        for r in recs:
            e = layer_energies(scatter(r, net))
            assert e[1] > e[2] > e[3]

    def test_invariant_under_aligned_shift(self, signals):
        net = build_network(cfg_of((1, 1, 1)))
        step = total_stride(net)
        base = layer_energies(scatter(signals[0], net))
        for k in (1, 3):
            moved = layer_energies(scatter(np.roll(signals[0], k * step), net))
            assert np.allclose(moved, base, rtol=0, atol=1e-8)


class TestCovariance:
    def test_zero_shift(self, signals):
        assert translation_covariance_defect(signals[0], cfg_of((1, 1)), 0) == 0.0

    @pytest.mark.parametrize("layout", [dict(qualities=(1, 1, 1)),
                                        dict(qualities=(2, 2), subsample=(2, 2)),
                                        dict(qualities=(4, 1), subsample=(4, 1), output_stride=2)])
    def test_aligned_shifts(self, signals, layout):
        net = build_network(cfg_of(**layout))
        step = total_stride(net)
        for x in signals[:3]:
            for k in range(1, 4):
                assert translation_covariance_defect(x, net, (k * step) % N or step) <= 1e-8

    def test_unaligned_rejected(self, signals):
        net = build_network(cfg_of((1, 1), subsample=(2, 1)))
        with pytest.raises(ValueError):
            translation_covariance_defect(signals[0], net, total_stride(net) + 1)


class TestTranslationSensitivity:
    def test_zero_shift(self, signals):
        measured, bound = translation_sensitivity(signals[0], cfg_of((1, 1)), 0)
        assert measured == 0.0 and bound == 0.0

    def test_doubling_rate_halves_single_layer_bound(self, signals):
        a = build_network(cfg_of((2,), subsample=(2,), output_stride=1))
        b = build_network(cfg_of((2,), subsample=(4,), output_stride=1))
        assert a.lowpass_sup == pytest.approx(b.lowpass_sup, rel=1e-12)
        _, ba = translation_sensitivity(signals[0], a, 5)
        _, bb = translation_sensitivity(signals[0], b, 5)
        assert bb == pytest.approx(ba / 2, rel=1e-12)

    def test_bound_arithmetic(self):
        assert translation_bound(3, 0.5, (2, 2), 2.0) == pytest.approx(2 * math.pi * 3 * 0.5 / 4 * 2.0)
        # doubling each of M rates divides by 2^M
        assert translation_bound(1, 1, (2, 4, 2), 1) == pytest.approx(translation_bound(1, 1, (1, 2, 1), 1) / 8)

    def test_measured_below_bound(self, signals):
        net = build_network(cfg_of((1, 1), subsample=(2, 1)))
        for x in signals:
            base = scatter(x, net)
            for t in range(1, 65, 7):
                measured, bound = translation_sensitivity(x, net, t, base)
                assert measured <= bound


class TestDeformation:
    def test_zero_tau(self, signals):
        assert deformation_sensitivity(signals[0], cfg_of((1, 1)), Signal(np.zeros(N), 1.0)) == 0.0

    def test_steep_tau_rejected(self, signals):
        tau = Signal(smooth_displacement(N, 0) * 40, 1.0)
        with pytest.raises(ValueError):
            deformation_sensitivity(signals[0], cfg_of((1,)), tau)

    def test_halving_never_increases(self):
        net = build_network(cfg_of((1, 1)))
        xs = random_bandlimited(N, 10, seed=11)
        for i, x in enumerate(xs):
            shape = smooth_displacement(N, i)
            base = scatter(x, net)
            d = [deformation_sensitivity(x, net, Signal(a * shape, 1.0), base) for a in (2.0, 1.0, 0.5, 0.25)]
            assert all(d[k + 1] <= d[k] + 1e-9 for k in range(3))


class TestContraction:
    @settings(max_examples=20, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 3.0))
    def test_random_pairs(self, seed, scale):
        net = build_network(cfg_of((2, 1), subsample=(2, 1)))
        f, g = random_bandlimited(N, 2, seed)
        g = g * scale
        assert feature_distance(scatter(f, net), scatter(g, net)) <= np.linalg.norm(f - g) + 1e-10


class TestSerialization:
    def test_round_trip(self, tmp_path, signals):
        sf = scatter(signals[0], cfg_of((2, 1, 1), subsample=(2, 1, 1)))
        save_features(sf, tmp_path / "feat")
        back = load_features(tmp_path / "feat")
        assert back.paths == sf.paths and back.strides == sf.strides
        for m in range(sf.depth + 1):
            assert np.array_equal(back.layer(m), sf.layer(m))

    def test_csv_row(self, signals):
        vec, _ = flatten(scatter(signals[0], cfg_of((1,))))
        row = features_csv_row(vec)
        assert np.array_equal(np.array([float(v) for v in row.split(",")]), vec)
