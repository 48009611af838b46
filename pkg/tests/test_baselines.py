import math

import numpy as np
import pytest

from mindec import baselines, mind
from mindec.baselines import decode_with, gaussian_view, genie_decode, map_decode, maxl_decode
from mindec.channels import ChannelModel, log_likelihood, sigma_for_snr, symbol_energy
from mindec.coding import build_hamming74, build_pam4, build_repetition

MIDDLETON = dict(impulse_ratio=5.0, impulse_prob=0.05)


def brute_map(cb, ch, y):
    best, arg = -np.inf, -1
    for i, x in enumerate(cb.codewords):
        score = (math.log(cb.prior[i]) if cb.prior[i] > 0 else -np.inf) + float(log_likelihood(ch, y, x))
        if score > best:
            best, arg = score, i
    return arg


class TestMAP:
    def test_noiseless(self):
        cb = build_hamming74()
        ch = ChannelModel("awgn", 0.01)
        for j in (0, 5, 15):
            assert map_decode(cb, ch, cb.codewords[j]) == j

    def test_nonuniform_midpoint(self):
        cb = build_pam4(0.05)
        for sigma in (0.3, 1.0, 2.0):
            ch = ChannelModel("awgn", sigma)
            assert map_decode(cb, ch, np.array([0.0])) == brute_map(cb, ch, np.array([0.0]))

    def test_matches_brute_force(self):
        cb = build_pam4(0.05)
        ch = ChannelModel("awgn", 1.3)
        ys = np.random.default_rng(0).normal(size=(300, 1)) * 3
        np.testing.assert_array_equal(map_decode(cb, ch, ys), [brute_map(cb, ch, y) for y in ys])

    def test_uniform_prior_equals_maxl(self):
        cb = build_hamming74()
        ch = ChannelModel("middleton", 0.8, **MIDDLETON)
        _, y, _ = mind.draw_samples(cb, ch, 10_000, np.random.default_rng(1))
        np.testing.assert_array_equal(map_decode(cb, ch, y), maxl_decode(cb, ch, y))

    def test_pure(self):
        cb = build_pam4(0.05)
        ch = ChannelModel("awgn", 1.0)
        y = np.random.default_rng(2).normal(size=(50, 1))
        np.testing.assert_array_equal(map_decode(cb, ch, y), map_decode(cb, ch, y))


class TestMaxL:
    def test_gaussian_is_nearest_codeword(self):
        cb = build_hamming74()
        ch = ChannelModel("awgn", 1.0)
        _, y, _ = mind.draw_samples(cb, ch, 10_000, np.random.default_rng(3))
        dist = ((y[:, None, :] - cb.codewords[None]) ** 2).sum(axis=-1)
        np.testing.assert_array_equal(maxl_decode(cb, ch, y), np.argmin(dist, axis=1))

    def test_csi_noiseless_nonlinear(self):
        cb = build_pam4(0.5)
        ch = ChannelModel("nonlinear_awgn", 1e-6)
        idx, y, _ = mind.draw_samples(cb, ch, 1000, np.random.default_rng(4))
        assert np.all(maxl_decode(cb, gaussian_view(ch, csi=True), y) == idx)

    def test_no_csi_worse_than_csi(self):
        cb = build_pam4(0.5)
        es = symbol_energy(cb.codewords, cb.prior, "nonlinear_awgn")
        ch = ChannelModel("nonlinear_awgn", sigma_for_snr(12.0, es))
        idx, y, _ = mind.draw_samples(cb, ch, 20_000, np.random.default_rng(5))
        ser_no = np.mean(maxl_decode(cb, gaussian_view(ch), y) != idx)
        ser_csi = np.mean(maxl_decode(cb, gaussian_view(ch, csi=True), y) != idx)
        se = math.sqrt((ser_no * (1 - ser_no) + ser_csi * (1 - ser_csi)) / len(idx))
        assert ser_no > ser_csi + 3 * se


class TestGenie:
    def test_all_clear_equals_gaussian(self):
        cb = build_hamming74()
        ch = ChannelModel("middleton", 0.7, **MIDDLETON)
        _, y, _ = mind.draw_samples(cb, ch, 2000, np.random.default_rng(6))
        side = np.zeros_like(y, dtype=int)
        np.testing.assert_array_equal(genie_decode(cb, ch, y, side),
                                      maxl_decode(cb, ChannelModel("awgn", 0.7), y))

    def test_single_sample_hit(self):
        cb = build_repetition(1)
        ch = ChannelModel("middleton", 1.0, **MIDDLETON)
        assert genie_decode(cb, ch, np.array([0.1]), np.array([1])) == 0

    def test_missing_side(self):
        cb = build_repetition(5)
        ch = ChannelModel("middleton", 1.0, **MIDDLETON)
        with pytest.raises(ValueError):
            genie_decode(cb, ch, np.zeros(5), None)

    def test_genie_beats_maxl_middleton(self):
        cb = build_repetition(5)
        ch = ChannelModel("middleton", sigma_for_snr(0.0, 1.0, "middleton", 5.0, 0.05), **MIDDLETON)
        idx, y, side = mind.draw_samples(cb, ch, 200_000, np.random.default_rng(7))
        e_g = np.mean(genie_decode(cb, ch, y, side) != idx)
        e_m = np.mean(maxl_decode(cb, ch, y) != idx)
        se = math.sqrt((e_g * (1 - e_g) + e_m * (1 - e_m)) / len(idx))
        assert e_g <= e_m + 3 * se


class TestDispatch:
    def test_kinds(self):
        cb = build_repetition(5)
        ch = ChannelModel("middleton", 0.8, **MIDDLETON)
        idx, y, side = mind.draw_samples(cb, ch, 500, np.random.default_rng(8))
        for kind in ("map", "maxl_gaussian", "maxl_gaussian_csi", "maxl_middleton", "genie_middleton"):
            out = decode_with(kind, cb, ch, y, side=side)
            assert out.shape == idx.shape

    def test_unknown(self):
        with pytest.raises(ValueError):
            decode_with("viterbi", build_repetition(5), ChannelModel("awgn", 1.0), np.zeros(5))

    def test_mind_needs_disc(self):
        with pytest.raises(ValueError):
            decode_with("mind_supervised", build_repetition(5), ChannelModel("awgn", 1.0), np.zeros(5))

    def test_gaussian_view_keeps_power(self):
        ch = ChannelModel("middleton", 0.5, **MIDDLETON)
        assert gaussian_view(ch).noise_variance == pytest.approx(ch.noise_variance)
        assert gaussian_view(ch).kind == "awgn"
        assert "genie_middleton" in baselines.DECODER_KINDS
