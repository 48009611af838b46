"""Analytic reference decoders.

All decoders score every codeword exhaustively and break ties towards the
lowest index (``np.argmax`` semantics). Each accepts one received vector
of shape (n,) and returns an int, or a batch (N, n) and returns an array.
"""

from __future__ import annotations

import numpy as np

from . import channels as chan
from .coding import Codebook

DECODER_KINDS = ("map", "maxl_gaussian", "maxl_gaussian_csi", "maxl_middleton",
                 "genie_middleton", "mind_supervised", "mind_unsupervised")


def _pick(scores: np.ndarray, single: bool):
    idx = np.argmax(scores, axis=-1)
    return int(idx[0]) if single else idx


def _scores(ch: chan.ChannelModel, cb: Codebook, y: np.ndarray) -> np.ndarray:
    return chan.log_likelihood(ch, y[:, None, :], cb.codewords[None])


def map_decode(cb: Codebook, ch: chan.ChannelModel, y):
    """argmax_i  ln P_X(x_i) + ln p(y | x_i)."""
    y = np.asarray(y, dtype=np.float64)
    y2 = np.atleast_2d(y)
    with np.errstate(divide="ignore"):
        logprior = np.log(cb.prior)
    return _pick(logprior[None, :] + _scores(ch, cb, y2), y.ndim == 1)


def maxl_decode(cb: Codebook, ch_assumed: chan.ChannelModel, y):
    """argmax_i ln p(y | x_i) under the decoder's assumed channel (prior ignored)."""
    y = np.asarray(y, dtype=np.float64)
    return _pick(_scores(ch_assumed, cb, np.atleast_2d(y)), y.ndim == 1)


def genie_decode(cb: Codebook, ch: chan.ChannelModel, y, side):
    """MaxL with the per-sample impulse indicators revealed."""
    if side is None or np.size(side) == 0:
        raise ValueError("genie decoding needs the impulse side information")
    y = np.asarray(y, dtype=np.float64)
    y2 = np.atleast_2d(y)
    s2 = np.atleast_2d(side)
    if s2.shape != y2.shape:
        raise ValueError("side information shape does not match the received block")
    scores = chan.genie_log_likelihood(ch, y2[:, None, :], cb.codewords[None], s2[:, None, :])
    return _pick(scores, y.ndim == 1)


def gaussian_view(ch: chan.ChannelModel, csi: bool = False) -> chan.ChannelModel:
    """The Gaussian channel a MaxL-Gaussian decoder assumes.

    Same average noise power as ``ch``. With ``csi`` the decoder also knows
    the deterministic channel map (only meaningful for the nonlinear channel).
    """
    kind = "nonlinear_awgn" if (csi and ch.kind == "nonlinear_awgn") else "awgn"
    return chan.ChannelModel(kind, float(np.sqrt(ch.noise_variance)))


def decode_with(kind: str, cb: Codebook, ch: chan.ChannelModel, y, side=None, disc=None):
    """Dispatch on a decoder kind name."""
    if kind == "map":
        return map_decode(cb, ch, y)
    if kind == "maxl_gaussian":
        return maxl_decode(cb, gaussian_view(ch), y)
    if kind == "maxl_gaussian_csi":
        return maxl_decode(cb, gaussian_view(ch, csi=True), y)
    if kind == "maxl_middleton":
        if ch.kind != "middleton":
            raise ValueError("maxl_middleton needs a middleton channel")
        return maxl_decode(cb, ch, y)
    if kind == "genie_middleton":
        return genie_decode(cb, ch, y, side)
    if kind in ("mind_supervised", "mind_unsupervised"):
        if disc is None:
            raise ValueError(f"{kind} needs a trained discriminator")
        from .mind import decode
        return decode(disc, y)
    raise ValueError(f"unknown decoder kind {kind!r}")
