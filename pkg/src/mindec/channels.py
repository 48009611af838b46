"""Simulated channels and their exact likelihoods.

Three memoryless channels act sample-by-sample on a real codeword:

* ``awgn``            y = x + n
* ``nonlinear_awgn``  y = sign(x) sqrt(|x|) + n
* ``middleton``       y = x + n, n Bernoulli-Gaussian: N(0, s^2) w.p. 1-P,
                      N(0, B s^2) w.p. P

All likelihood functions broadcast over leading axes and sum over the last
one, so ``log_likelihood(ch, y[:, None, :], codewords[None])`` scores every
codeword against every received vector in one call.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KINDS = ("awgn", "nonlinear_awgn", "middleton")
_LOG_2PI = np.log(2.0 * np.pi)


@dataclass(frozen=True)
class ChannelModel:
    kind: str
    noise_sigma_b: float
    impulse_ratio: float = 1.0
    impulse_prob: float = 0.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown channel kind {self.kind!r}")
        if not self.noise_sigma_b > 0 or not np.isfinite(self.noise_sigma_b):
            raise ValueError(f"noise_sigma_b must be positive, got {self.noise_sigma_b}")
        if self.kind == "middleton":
            if not self.impulse_ratio >= 1:
                raise ValueError("impulse_ratio B must be >= 1")
            if not 0.0 <= self.impulse_prob <= 1.0:
                raise ValueError("impulse_prob P must lie in [0, 1]")

    @property
    def noise_variance(self) -> float:
        """Average noise power E[n^2]."""
        s2 = self.noise_sigma_b ** 2
        if self.kind == "middleton":
            return (1.0 - self.impulse_prob) * s2 + self.impulse_prob * self.impulse_ratio * s2
        return s2

    def with_sigma(self, sigma_b: float) -> "ChannelModel":
        return ChannelModel(self.kind, sigma_b, self.impulse_ratio, self.impulse_prob)


def channel_map(kind: str, x) -> np.ndarray:
    """Deterministic part of the channel, applied before the noise is added."""
    x = np.asarray(x, dtype=np.float64)
    if kind == "nonlinear_awgn":
        return np.sign(x) * np.sqrt(np.abs(x))
    return x


def transmit(ch: ChannelModel, x, rng: np.random.Generator):
    """Send ``x`` (shape (..., n)) through the channel.

    Returns ``(y, side)``. For the Middleton channel ``side`` holds the
    Bernoulli impulse indicators (same shape as ``x``, dtype int8); for the
    other channels it is an empty array.
    """
    x = np.asarray(x, dtype=np.float64)
    s = channel_map(ch.kind, x)
    noise = rng.standard_normal(x.shape) * ch.noise_sigma_b
    if ch.kind == "middleton":
        side = (rng.random(x.shape) < ch.impulse_prob).astype(np.int8)
        noise = np.where(side == 1, noise * np.sqrt(ch.impulse_ratio), noise)
        return s + noise, side
    return s + noise, np.zeros((0,), dtype=np.int8)


def _gauss_logpdf(u: np.ndarray, var) -> np.ndarray:
    return -0.5 * (_LOG_2PI + np.log(var) + u * u / var)


def noise_logpdf(ch: ChannelModel, u) -> np.ndarray:
    """Per-sample natural-log density of the additive noise."""
    u = np.asarray(u, dtype=np.float64)
    s2 = ch.noise_sigma_b ** 2
    if ch.kind != "middleton":
        return _gauss_logpdf(u, s2)
    P = ch.impulse_prob
    a = _gauss_logpdf(u, s2)
    b = _gauss_logpdf(u, ch.impulse_ratio * s2)
    if P == 0.0:
        return a
    if P == 1.0:
        return b
    return np.logaddexp(np.log1p(-P) + a, np.log(P) + b)


def log_likelihood(ch: ChannelModel, y, x) -> np.ndarray:
    """ln p(y | x), summed over the last axis (broadcasting over the rest)."""
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if not (np.all(np.isfinite(y)) and np.all(np.isfinite(x))):
        raise ValueError("non-finite input to log_likelihood")
    return noise_logpdf(ch, y - channel_map(ch.kind, x)).sum(axis=-1)


def genie_log_likelihood(ch: ChannelModel, y, x, side) -> np.ndarray:
    """ln p(y | x, eps) when the impulse indicators ``eps`` are known."""
    if ch.kind != "middleton":
        raise ValueError("genie likelihood requires a middleton channel")
    y = np.asarray(y, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    side = np.asarray(side)
    if side.shape[-1] != y.shape[-1]:
        raise ValueError("side information length does not match the received vector")
    s2 = ch.noise_sigma_b ** 2
    var = np.where(side == 1, ch.impulse_ratio * s2, s2)
    return _gauss_logpdf(y - x, var).sum(axis=-1)


def sigma_for_snr(snr_db: float, symbol_energy: float, kind: str = "awgn",
                  impulse_ratio: float = 1.0, impulse_prob: float = 0.0) -> float:
    """sigma_b such that symbol_energy / E[n^2] equals the requested SNR."""
    if not symbol_energy > 0:
        raise ValueError("symbol_energy must be positive")
    total_var = symbol_energy / 10.0 ** (snr_db / 10.0)
    if kind == "middleton":
        total_var /= (1.0 - impulse_prob) + impulse_prob * impulse_ratio
    return float(np.sqrt(total_var))


def symbol_energy(codewords, prior, kind: str) -> float:
    """Prior-weighted mean square of the channel symbols (after the channel map)."""
    s = channel_map(kind, codewords)
    return float(np.dot(prior, np.mean(s * s, axis=-1)))
