"""Discriminator-based decoding (MIND).

A discriminator ``D = sigmoid(l)`` trained to maximise the value function
below converges to ``D*(x_i, y) = 1 / (1 + P(x_i | y))``. Hence

    P(x_i | y) = (1 - D*) / D* = exp(-l_i)      and      i(x_i | y) = l_i log2(e),

so the logit itself is the a-posteriori information in nats. Two
parameterisations are provided:

* supervised: a network y -> (l_1, ..., l_M), trained with the one-hot form
  of the value function;
* unsupervised: a network (x, y) -> l, trained on joint pairs (x_j, y_j)
  against marginal pairs (u, y) with u uniform over the codebook.

Losses are the negated value functions, evaluated from logits with
``log D = -softplus(-l)`` and ``log(1 - D) = -softplus(l)``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import channels as chan
from .coding import Codebook, sample_messages
from .neuralnet import (AdamState, CheckpointError, Network, NetworkSpec, adam_step,
                        dumps_network, forward, init_network, loads_network, value_and_grad)

log = logging.getLogger(__name__)

LOG2E = 1.0 / np.log(2.0)
DEFAULT_HIDDEN = (64, 64)


class TrainingDivergence(RuntimeError):
    """The training loss became non-finite."""


def softplus(z):
    return np.logaddexp(0.0, z)


def sigmoid(z):
    z = np.asarray(z, dtype=np.float64)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


# -- value functions ---------------------------------------------------------

def supervised_loss(logits, label_onehots):
    """Negated one-hot value function, averaged over the batch.

    loss = mean_rows [ sum_i softplus(-l_i) + softplus(l_label) ]
    Returns ``(loss, dloss/dlogits)``.
    """
    logits = np.asarray(logits, dtype=np.float64)
    onehot = np.asarray(label_onehots, dtype=np.float64)
    if logits.shape != onehot.shape or logits.ndim != 2:
        raise ValueError(f"shape mismatch: logits {logits.shape}, labels {onehot.shape}")
    if not (np.all((onehot == 0) | (onehot == 1)) and np.all(onehot.sum(axis=1) == 1)):
        raise ValueError("label rows must be one-hot")
    B = logits.shape[0]
    loss = (softplus(-logits).sum() + softplus(logits[onehot == 1]).sum()) / B
    grad = (-sigmoid(-logits) + onehot * sigmoid(logits)) / B
    return float(loss), grad


def unsupervised_loss(joint_logits, marginal_logits, M: int):
    """Negated discrete value function with uniform reference over ``M`` codewords.

    loss = M mean(softplus(-l_marginal)) + mean(softplus(l_joint))
    Returns ``(loss, dloss/djoint, dloss/dmarginal)``.
    """
    a = np.asarray(joint_logits, dtype=np.float64).ravel()
    m = np.asarray(marginal_logits, dtype=np.float64).ravel()
    if a.size == 0 or m.size == 0:
        raise ValueError("joint and marginal batches must be non-empty")
    loss = M * softplus(-m).mean() + softplus(a).mean()
    return float(loss), sigmoid(a) / a.size, -M * sigmoid(-m) / m.size


def codeword_value_terms(logits, labels) -> np.ndarray:
    """Per-codeword empirical value terms J_i on a fixed sample set.

    ``logits[j, i]`` is the discriminator logit for (x_i, y_j) and
    ``labels[j]`` the index actually sent with y_j. The first term averages
    log D(x_i, y) over all y (draws of p_Y); the second averages
    log(1 - D(x_i, y)) over the samples sent with x_i, weighted by their
    empirical frequency. ``sum(J)`` is the full value function.
    """
    logits = np.asarray(logits, dtype=np.float64)
    labels = np.asarray(labels)
    N, M = logits.shape
    first = -softplus(-logits).mean(axis=0)
    second = np.zeros(M)
    own = -softplus(logits[np.arange(N), labels])
    np.add.at(second, labels, own)
    return first + second / N


# -- discriminators ----------------------------------------------------------

@dataclass
class InputScaler:
    shift: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, samples) -> "InputScaler":
        s = np.asarray(samples, dtype=np.float64)
        std = s.std(axis=0)
        return cls(s.mean(axis=0), np.where(std > 0, std, 1.0))

    @classmethod
    def identity(cls, width: int) -> "InputScaler":
        return cls(np.zeros(width), np.ones(width))

    def __call__(self, v):
        return (np.asarray(v, dtype=np.float64) - self.shift) / self.scale


class _Discriminator:
    codebook: Codebook
    clamp: float

    def logits(self, y) -> np.ndarray:  # pragma: no cover - interface
        raise NotImplementedError


@dataclass
class SupervisedDiscriminator(_Discriminator):
    net: Network
    codebook: Codebook
    scaler: InputScaler
    clamp: float = 30.0
    kind = "supervised"

    def __post_init__(self):
        if self.net.spec.n_inputs != self.codebook.n or self.net.spec.n_outputs != self.codebook.M:
            raise ValueError("network must map n inputs to M logits")

    def logits(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        return forward(self.net, self.scaler(y))


@dataclass
class UnsupervisedDiscriminator(_Discriminator):
    net: Network
    codebook: Codebook
    scaler: InputScaler
    clamp: float = 30.0
    kind = "unsupervised"

    def __post_init__(self):
        if self.net.spec.n_inputs != 2 * self.codebook.n or self.net.spec.n_outputs != 1:
            raise ValueError("network must map (x, y) pairs to one logit")

    def pair_logits(self, x, y) -> np.ndarray:
        v = np.concatenate([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)], axis=-1)
        return forward(self.net, self.scaler(v))[:, 0]

    def logits(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        out = np.empty((y.shape[0], self.codebook.M))
        for i, x in enumerate(self.codebook.codewords):
            out[:, i] = self.pair_logits(np.broadcast_to(x, y.shape), y)
        return out


@dataclass
class BayesDiscriminator(_Discriminator):
    """Analytic optimum: logits = -ln P(x_i | y) from the true channel and prior."""
    codebook: Codebook
    channel: chan.ChannelModel
    clamp: float = np.inf
    kind = "bayes"

    def logits(self, y) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        return -bayes_log_posterior(self.codebook, self.channel, y)


def bayes_log_posterior(cb: Codebook, ch: chan.ChannelModel, y) -> np.ndarray:
    """ln P(x_i | y) for each row of ``y`` (shape (N, n) -> (N, M))."""
    y = np.atleast_2d(np.asarray(y, dtype=np.float64))
    with np.errstate(divide="ignore"):
        joint = np.log(cb.prior)[None, :] + chan.log_likelihood(ch, y[:, None, :], cb.codewords[None])
    top = joint.max(axis=1, keepdims=True)
    lse = top + np.log(np.exp(joint - top).sum(axis=1, keepdims=True))
    return joint - lse


def make_supervised(codebook: Codebook, hidden=DEFAULT_HIDDEN, activation: str = "relu",
                    seed: int = 0, clamp: float = 30.0) -> SupervisedDiscriminator:
    spec = NetworkSpec((codebook.n, *hidden, codebook.M), activation)
    return SupervisedDiscriminator(init_network(spec, seed), codebook,
                                   InputScaler.identity(codebook.n), clamp)


def make_unsupervised(codebook: Codebook, hidden=DEFAULT_HIDDEN, activation: str = "relu",
                      seed: int = 0, clamp: float = 30.0) -> UnsupervisedDiscriminator:
    spec = NetworkSpec((2 * codebook.n, *hidden, 1), activation)
    return UnsupervisedDiscriminator(init_network(spec, seed), codebook,
                                     InputScaler.identity(2 * codebook.n), clamp)


# -- posterior extraction and decoding ---------------------------------------

@dataclass
class PosteriorEstimate:
    probs: np.ndarray             # (..., M)
    apost_info_bits: np.ndarray   # (..., M), probs == 2 ** -apost_info_bits
    normalized: bool


def posterior_from_logits(logits, clamp: float = 30.0, normalize: bool = False) -> PosteriorEstimate:
    logits = np.asarray(logits, dtype=np.float64)
    if not np.all(np.isfinite(logits) | np.isposinf(logits)):
        raise ValueError("non-finite discriminator logits")
    lg = np.clip(logits, -clamp, clamp)
    if normalize:
        # log-sum-exp keeps the normalised pmf accurate for widely spread logits
        low = lg.min(axis=-1, keepdims=True)
        lg = lg - low + np.log(np.exp(-(lg - low)).sum(axis=-1, keepdims=True))
    return PosteriorEstimate(np.exp(-lg), lg * LOG2E, normalize)


def posterior(disc: _Discriminator, y, normalize: bool = False) -> PosteriorEstimate:
    """Estimated P(x_i | y) for one received vector (n,) or a batch (N, n)."""
    y = np.asarray(y, dtype=np.float64)
    est = posterior_from_logits(disc.logits(y), disc.clamp, normalize)
    if y.ndim == 1:
        return PosteriorEstimate(est.probs[0], est.apost_info_bits[0], normalize)
    return est


def decode(disc: _Discriminator, y):
    """Index minimising the a-posteriori information (lowest index on ties)."""
    y = np.asarray(y, dtype=np.float64)
    lg = np.clip(disc.logits(y), -disc.clamp, disc.clamp)
    idx = np.argmin(lg, axis=-1)
    return int(idx[0]) if y.ndim == 1 else idx


# -- training ----------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 40
    batch_size: int = 500
    samples_per_epoch: int = 100_000
    learning_rate: float = 3e-3
    seed: int = 0
    logit_clamp: float = 30.0
    lr_decay: float = 0.93          # multiplicative per-epoch factor
    hidden: tuple[int, ...] = DEFAULT_HIDDEN
    activation: str = "relu"

    def __post_init__(self):
        for name in ("epochs", "batch_size", "samples_per_epoch"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.logit_clamp < 30:
            raise ValueError("logit_clamp must be at least 30")
        if not 0 < self.lr_decay <= 1:
            raise ValueError("lr_decay must lie in (0, 1]")


@dataclass
class TrainResult:
    disc: _Discriminator
    loss_trace: list[float] = field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.loss_trace[-1] if self.loss_trace else float("nan")


def _stream(seed: int, *key: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, *key]))


def draw_samples(cb: Codebook, ch: chan.ChannelModel, size: int, rng: np.random.Generator):
    """Transmit ``size`` prior-distributed messages: returns ``(idx, y, side)``."""
    idx = sample_messages(cb, size, rng)
    y, side = chan.transmit(ch, cb.codewords[idx], rng)
    return idx, y, side


def train(disc: _Discriminator, codebook: Codebook, channel: chan.ChannelModel,
          cfg: TrainConfig) -> TrainResult:
    """Fit ``disc`` in place on freshly transmitted data every epoch.

    The input scaler is refit from a pilot draw before the first epoch.
    """
    if disc.codebook is not codebook and disc.codebook.fingerprint() != codebook.fingerprint():
        raise ValueError("discriminator was built for a different codebook")
    disc.clamp = cfg.logit_clamp
    unsup = isinstance(disc, UnsupervisedDiscriminator)
    if not unsup and not isinstance(disc, SupervisedDiscriminator):
        raise TypeError(f"cannot train {type(disc).__name__}")

    pilot_idx, pilot_y, _ = draw_samples(codebook, channel, min(cfg.samples_per_epoch, 20_000),
                                         _stream(cfg.seed, 0))
    if unsup:
        x_scaler = InputScaler.fit(codebook.codewords)
        y_scaler = InputScaler.fit(pilot_y)
        disc.scaler = InputScaler(np.concatenate([x_scaler.shift, y_scaler.shift]),
                                  np.concatenate([x_scaler.scale, y_scaler.scale]))
    else:
        disc.scaler = InputScaler.fit(pilot_y)

    net = disc.net
    state = AdamState.for_network(net, lr=cfg.learning_rate)
    eye = np.eye(codebook.M)
    M = codebook.M
    trace = []
    for epoch in range(cfg.epochs):
        rng = _stream(cfg.seed, 1, epoch)
        idx, y, _ = draw_samples(codebook, channel, cfg.samples_per_epoch, rng)
        z = disc.scaler(np.concatenate([codebook.codewords[idx], y], axis=1) if unsup else y)
        total, count = 0.0, 0
        for start in range(0, cfg.samples_per_epoch, cfg.batch_size):
            stop = min(start + cfg.batch_size, cfg.samples_per_epoch)
            if unsup:
                joint = z[start:stop]
                B = joint.shape[0]
                u = disc.scaler(np.concatenate(
                    [codebook.codewords[rng.integers(M, size=B)], y[start:stop][rng.permutation(B)]],
                    axis=1))
                batch = np.vstack([joint, u])

                def loss_fn(out, B=B):
                    loss, gj, gm = unsupervised_loss(out[:B, 0], out[B:, 0], M)
                    return loss, np.concatenate([gj, gm])[:, None]
            else:
                batch = z[start:stop]
                onehot = eye[idx[start:stop]]

                def loss_fn(out, onehot=onehot):
                    return supervised_loss(out, onehot)

            loss, grads = value_and_grad(net, batch, loss_fn)
            if not np.isfinite(loss):
                raise TrainingDivergence(f"non-finite loss at epoch {epoch}, step {state.t}")
            adam_step(net, grads, state)
            total += loss * (stop - start)
            count += stop - start
        trace.append(total / count)
        state.lr *= cfg.lr_decay
        log.debug("epoch %d loss %.6f", epoch, trace[-1])
    return TrainResult(disc, trace)


def fit_discriminator(codebook: Codebook, channel: chan.ChannelModel, cfg: TrainConfig,
                      kind: str = "supervised") -> TrainResult:
    """Build a fresh discriminator seeded from ``cfg.seed`` and train it."""
    make = make_supervised if kind == "supervised" else make_unsupervised
    disc = make(codebook, cfg.hidden, cfg.activation,
                seed=int(np.random.SeedSequence([cfg.seed, 2]).generate_state(1)[0]),
                clamp=cfg.logit_clamp)
    return train(disc, codebook, channel, cfg)


# -- checkpoints -------------------------------------------------------------

def _vec(a) -> str:
    return ",".join(format(float(v), ".17g") for v in np.ravel(a))


def dumps_discriminator(disc: _Discriminator) -> str:
    if not isinstance(disc, (SupervisedDiscriminator, UnsupervisedDiscriminator)):
        raise TypeError("only network discriminators can be checkpointed")
    extra = {
        "discriminator": disc.kind,
        "codebook_fingerprint": disc.codebook.fingerprint(),
        "logit_clamp": format(disc.clamp, ".17g"),
        "input_shift": _vec(disc.scaler.shift),
        "input_scale": _vec(disc.scaler.scale),
    }
    return dumps_network(disc.net, extra)


def loads_discriminator(text: str, codebook: Codebook) -> _Discriminator:
    """Rebuild a discriminator; refuses a checkpoint trained on another codebook."""
    net, header = loads_network(text)
    try:
        kind = header["discriminator"]
        fp = header["codebook_fingerprint"]
        clamp = float(header["logit_clamp"])
        shift = np.array(header["input_shift"].split(","), dtype=np.float64)
        scale = np.array(header["input_scale"].split(","), dtype=np.float64)
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"missing discriminator header field: {exc}") from exc
    if fp != codebook.fingerprint():
        raise CheckpointError("codebook fingerprint mismatch: checkpoint was trained on a different codebook")
    cls = {"supervised": SupervisedDiscriminator, "unsupervised": UnsupervisedDiscriminator}.get(kind)
    if cls is None:
        raise CheckpointError(f"unknown discriminator kind {kind!r}")
    try:
        return cls(net, codebook, InputScaler(shift, scale), clamp)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc
