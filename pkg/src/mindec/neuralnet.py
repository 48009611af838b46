"""Dense feedforward networks with hand-written backpropagation and Adam.

Everything runs in float64. Weight matrices are stored as (fan_out, fan_in)
so a layer computes ``a @ W.T + b`` on a row-major batch.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

CHECKPOINT_VERSION = 1
ACTIVATIONS = ("relu", "tanh")


class CheckpointError(ValueError):
    """Raised for unreadable, corrupt or version-mismatched checkpoints."""


@dataclass(frozen=True)
class NetworkSpec:
    layer_sizes: tuple[int, ...]
    hidden_activation: str = "relu"

    def __post_init__(self):
        sizes = tuple(int(s) for s in self.layer_sizes)
        if len(sizes) < 2:
            raise ValueError("a network needs at least an input and an output layer")
        if any(s < 1 for s in sizes):
            raise ValueError(f"layer sizes must be positive, got {sizes}")
        if self.hidden_activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.hidden_activation!r}")
        object.__setattr__(self, "layer_sizes", sizes)

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]


@dataclass
class Network:
    spec: NetworkSpec
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def params(self) -> list[np.ndarray]:
        """Parameters in canonical order ``[W0, b0, W1, b1, ...]`` (views, not copies)."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    @property
    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "Network":
        return Network(self.spec, [w.copy() for w in self.weights], [b.copy() for b in self.biases])


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    t: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_network(cls, net: Network, lr: float = 1e-3, beta1: float = 0.9,
                    beta2: float = 0.999, eps: float = 1e-8) -> "AdamState":
        zeros = [np.zeros_like(p) for p in net.params()]
        return cls(m=zeros, v=[z.copy() for z in zeros], t=0, lr=lr,
                   beta1=beta1, beta2=beta2, eps=eps)


def init_network(spec: NetworkSpec, seed: int) -> Network:
    """Uniform init in ``[-sqrt(6/fan_in), sqrt(6/fan_in)]``, zero biases."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(spec.layer_sizes[:-1], spec.layer_sizes[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(spec, weights, biases)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    return np.tanh(z)


def _activation_grad(z: np.ndarray, a: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(np.float64)
    return 1.0 - a * a


def _as_batch(net: Network, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2 or x.shape[1] != net.spec.n_inputs:
        raise ValueError(f"expected batch of width {net.spec.n_inputs}, got shape {x.shape}")
    return x


def _forward_cache(net: Network, x: np.ndarray):
    pre, post = [], [x]
    a = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = a @ w.T + b
        pre.append(z)
        a = z if i == last else _activate(z, net.spec.hidden_activation)
        post.append(a)
    return pre, post


def forward(net: Network, batch) -> np.ndarray:
    """Logits for a (batch, n_inputs) matrix; a 1-D input is treated as one row."""
    x = _as_batch(net, batch)
    return _forward_cache(net, x)[1][-1]


def _backward_from_cache(net: Network, pre, post, upstream: np.ndarray) -> list[np.ndarray]:
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))  # type: ignore[list-item]
    delta = upstream
    for i in range(len(net.weights) - 1, -1, -1):
        grads[2 * i] = delta.T @ post[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.weights[i]) * _activation_grad(
                pre[i - 1], post[i], net.spec.hidden_activation)
    return grads


def backward(net: Network, batch, upstream_grad) -> list[np.ndarray]:
    """Gradients of ``sum(upstream_grad * forward(net, batch))`` w.r.t. ``net.params()``."""
    x = _as_batch(net, batch)
    g = np.asarray(upstream_grad, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != (x.shape[0], net.spec.n_outputs):
        raise ValueError(f"upstream gradient shape {g.shape} does not match output "
                         f"{(x.shape[0], net.spec.n_outputs)}")
    pre, post = _forward_cache(net, x)
    return _backward_from_cache(net, pre, post, g)


def value_and_grad(net: Network, batch, loss_fn: Callable[[np.ndarray], tuple[float, np.ndarray]]):
    """Single forward/backward pass. ``loss_fn`` maps logits to ``(loss, dloss/dlogits)``."""
    x = _as_batch(net, batch)
    pre, post = _forward_cache(net, x)
    loss, dlogits = loss_fn(post[-1])
    return loss, _backward_from_cache(net, pre, post, dlogits)


def adam_step(net: Network, grads: Sequence[np.ndarray], state: AdamState):
    """Bias-corrected Adam update, applied in place. Returns ``(net, state)``."""
    params = net.params()
    if len(grads) != len(params):
        raise ValueError("gradient list does not match parameter list")
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise FloatingPointError("non-finite gradient entry")
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1 ** state.t
    corr2 = 1.0 - b2 ** state.t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return net, state


# -- checkpoints -------------------------------------------------------------

def _fmt(values: np.ndarray) -> str:
    return " ".join(format(float(v), ".17g") for v in np.ravel(values))


def dumps_network(net: Network, extra: dict[str, str] | None = None) -> str:
    """Text checkpoint: ``key = value`` header, then one block per array.

    Each block starts with ``[W<i>] rows cols`` or ``[b<i>] size`` and lists
    the entries row-major, one matrix row per line, 17 significant digits.
    """
    buf = io.StringIO()
    buf.write("# mindec network checkpoint\n")
    buf.write(f"format_version = {CHECKPOINT_VERSION}\n")
    buf.write(f"layer_sizes = {','.join(str(s) for s in net.spec.layer_sizes)}\n")
    buf.write(f"activation = {net.spec.hidden_activation}\n")
    for key, value in (extra or {}).items():
        if "\n" in str(value) or "=" in key:
            raise ValueError(f"invalid header entry {key!r}")
        buf.write(f"{key} = {value}\n")
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        buf.write(f"[W{i}] {w.shape[0]} {w.shape[1]}\n")
        for row in w:
            buf.write(_fmt(row) + "\n")
        buf.write(f"[b{i}] {b.size}\n")
        buf.write(_fmt(b) + "\n")
    return buf.getvalue()


def loads_network(text: str) -> tuple[Network, dict[str, str]]:
    lines = [ln for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    header: dict[str, str] = {}
    pos = 0
    while pos < len(lines) and not lines[pos].startswith("["):
        key, sep, value = lines[pos].partition("=")
        if not sep:
            raise CheckpointError(f"malformed header line: {lines[pos]!r}")
        header[key.strip()] = value.strip()
        pos += 1
    try:
        version = int(header.pop("format_version"))
        sizes = tuple(int(s) for s in header.pop("layer_sizes").split(","))
        activation = header.pop("activation")
    except (KeyError, ValueError) as exc:
        raise CheckpointError(f"incomplete checkpoint header: {exc}") from exc
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    try:
        spec = NetworkSpec(sizes, activation)
    except ValueError as exc:
        raise CheckpointError(str(exc)) from exc

    weights, biases = [], []
    try:
        for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
            tag = lines[pos].split()
            if tag != [f"[W{i}]", str(fan_out), str(fan_in)]:
                raise CheckpointError(f"expected weight block {i}, found {lines[pos]!r}")
            rows = [np.array(lines[pos + 1 + r].split(), dtype=np.float64) for r in range(fan_out)]
            w = np.vstack(rows)
            pos += 1 + fan_out
            tag = lines[pos].split()
            if tag != [f"[b{i}]", str(fan_out)]:
                raise CheckpointError(f"expected bias block {i}, found {lines[pos]!r}")
            b = np.array(lines[pos + 1].split(), dtype=np.float64)
            pos += 2
            if w.shape != (fan_out, fan_in) or b.shape != (fan_out,):
                raise CheckpointError(f"array size mismatch in layer {i}")
            weights.append(w)
            biases.append(b)
    except (IndexError, ValueError) as exc:
        raise CheckpointError(f"corrupt checkpoint body: {exc}") from exc
    if pos != len(lines):
        raise CheckpointError("trailing data after last layer")
    if not all(np.all(np.isfinite(a)) for a in weights + biases):
        raise CheckpointError("non-finite parameter in checkpoint")
    return Network(spec, weights, biases), header


def save_network(net: Network, path, extra: dict[str, str] | None = None) -> None:
    Path(path).write_text(dumps_network(net, extra))


def load_network(path) -> tuple[Network, dict[str, str]]:
    return loads_network(Path(path).read_text())
