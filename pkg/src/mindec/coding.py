"""Codebooks: enumerated modulated codewords with their prior.

BPSK convention throughout: bit 0 -> +1, bit 1 -> -1.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

# systematic (7,4) Hamming code, G = [I | A], H = [A^T | I]
HAMMING74_PARITY = np.array([[1, 1, 0],
                             [1, 0, 1],
                             [0, 1, 1],
                             [1, 1, 1]], dtype=np.int8)


@dataclass(frozen=True)
class Codebook:
    codewords: np.ndarray      # (M, n) real symbols
    prior: np.ndarray          # (M,)
    label_bits: np.ndarray     # (M, k) information bits
    name: str = ""

    def __post_init__(self):
        cw = np.atleast_2d(np.asarray(self.codewords, dtype=np.float64))
        prior = np.asarray(self.prior, dtype=np.float64)
        bits = np.atleast_2d(np.asarray(self.label_bits, dtype=np.int8))
        M = cw.shape[0]
        if M != 2 ** bits.shape[1] or bits.shape[0] != M:
            raise ValueError(f"need M = 2^k codewords, got M={M}, k={bits.shape[1]}")
        if prior.shape != (M,) or np.any(prior < 0) or abs(prior.sum() - 1.0) > 1e-12:
            raise ValueError("prior must be a pmf over the codewords")
        if len(np.unique(cw, axis=0)) != M:
            raise ValueError("codewords must be distinct")
        for attr, arr in (("codewords", cw), ("prior", prior), ("label_bits", bits)):
            arr.setflags(write=False)
            object.__setattr__(self, attr, arr)

    @property
    def M(self) -> int:
        return self.codewords.shape[0]

    @property
    def n(self) -> int:
        return self.codewords.shape[1]

    @property
    def k(self) -> int:
        return self.label_bits.shape[1]

    @property
    def rate(self) -> float:
        return self.k / self.n

    def fingerprint(self) -> str:
        """SHA-256 of the codeword table and prior, as 17-digit decimal text."""
        text = "\n".join(" ".join(format(v, ".17g") for v in row) for row in self.codewords)
        text += "\n" + " ".join(format(v, ".17g") for v in self.prior)
        return hashlib.sha256(text.encode()).hexdigest()


def bpsk(bits) -> np.ndarray:
    return 1.0 - 2.0 * np.asarray(bits, dtype=np.float64)


def index_bits(k: int) -> np.ndarray:
    """All k-bit messages, row i is the binary expansion of i (MSB first)."""
    idx = np.arange(2 ** k)
    return ((idx[:, None] >> np.arange(k - 1, -1, -1)) & 1).astype(np.int8)


def build_pam4(p_low: float) -> Codebook:
    """4-PAM {-3, -1, 1, 3} with prior [(1-P)/2, P/2, (1-P)/2, P/2].

    Labels are Gray coded: -3:00, -1:01, 1:11, 3:10.
    """
    if not 0.0 < p_low < 1.0:
        raise ValueError("p_low must lie strictly between 0 and 1")
    prior = np.array([(1 - p_low) / 2, p_low / 2, (1 - p_low) / 2, p_low / 2])
    labels = np.array([[0, 0], [0, 1], [1, 1], [1, 0]])
    return Codebook(np.array([[-3.0], [-1.0], [1.0], [3.0]]), prior, labels,
                    name=f"pam4(P={p_low:g})")


def build_repetition(length: int = 5) -> Codebook:
    if length < 1 or length % 2 == 0:
        raise ValueError("repetition length must be odd and positive")
    bits = np.array([[0] * length, [1] * length])
    return Codebook(bpsk(bits), np.full(2, 0.5), np.array([[0], [1]]),
                    name=f"repetition({length})")


def hamming74_generator() -> np.ndarray:
    return np.hstack([np.eye(4, dtype=np.int8), HAMMING74_PARITY])


def hamming74_check() -> np.ndarray:
    return np.hstack([HAMMING74_PARITY.T, np.eye(3, dtype=np.int8)])


def build_hamming74() -> Codebook:
    msgs = index_bits(4)
    code_bits = (msgs @ hamming74_generator()) % 2
    return Codebook(bpsk(code_bits), np.full(16, 1 / 16), msgs, name="hamming(7,4)")


@dataclass(frozen=True)
class ConvCodeSpec:
    """Terminated rate-1/2 feedforward convolutional code."""
    memory: int = 2
    generators: tuple[int, int] = (0o7, 0o5)
    info_bits: int = 7
    tail_bits: int = 2

    def __post_init__(self):
        if self.tail_bits != self.memory:
            raise ValueError("zero termination needs tail_bits == memory")
        for g in self.generators:
            if not 0 < g < 2 ** (self.memory + 1):
                raise ValueError(f"generator {g:o} does not fit memory {self.memory}")

    @property
    def coded_length(self) -> int:
        return len(self.generators) * (self.info_bits + self.tail_bits)


def conv_encode(bits, spec: ConvCodeSpec) -> np.ndarray:
    """Shift-register encoder; appends ``tail_bits`` zeros so the trellis ends in state 0.

    Generator taps are read MSB first: octal 7 = 111 taps (u_t, u_{t-1}, u_{t-2}).
    """
    taps = [[(g >> (spec.memory - j)) & 1 for j in range(spec.memory + 1)]
            for g in spec.generators]
    register = [0] * spec.memory
    out = []
    for u in list(np.asarray(bits, dtype=int)) + [0] * spec.tail_bits:
        window = [u] + register
        for t in taps:
            out.append(sum(a * b for a, b in zip(t, window)) % 2)
        register = [u] + register[:-1]
    return np.array(out, dtype=np.int8)


def build_conv(spec: ConvCodeSpec | None = None) -> Codebook:
    spec = spec or ConvCodeSpec()
    msgs = index_bits(spec.info_bits)
    code_bits = np.array([conv_encode(m, spec) for m in msgs])
    return Codebook(bpsk(code_bits), np.full(len(msgs), 1 / len(msgs)), msgs,
                    name=f"conv({spec.generators[0]:o},{spec.generators[1]:o})")


def sample_messages(cb: Codebook, size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices drawn i.i.d. from the codebook prior."""
    # inverse-CDF keeps the draw stream identical for equal priors
    cdf = np.cumsum(cb.prior)
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(size), side="right")


def sample_message(cb: Codebook, rng: np.random.Generator) -> tuple[int, np.ndarray]:
    i = int(sample_messages(cb, 1, rng)[0])
    return i, cb.codewords[i]


def dump_codebook(cb: Codebook) -> str:
    """Tab-separated table: index, label bits, symbols, prior."""
    lines = [f"# {cb.name}  M={cb.M} n={cb.n} k={cb.k} R={cb.rate:.6g}",
             "index\tbits\tsymbols\tprior"]
    for i in range(cb.M):
        bits = "".join(str(b) for b in cb.label_bits[i])
        syms = " ".join(format(v, "g") for v in cb.codewords[i])
        lines.append(f"{i}\t{bits}\t{syms}\t{cb.prior[i]:.17g}")
    return "\n".join(lines) + "\n"
