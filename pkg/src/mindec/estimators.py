"""Monte-Carlo estimates of entropies, mutual information and error
probability from per-sample posterior pmfs.

Posteriors are passed as an (N, M) array or a :class:`PosteriorEstimate`;
rows are renormalised before use. Standard errors are plug-in CLT values
over the N per-sample contributions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .mind import PosteriorEstimate


@dataclass(frozen=True)
class RateEstimate:
    hx_bits: float
    hxy_bits: float
    mi_bits_per_use: float
    pe: float
    n_samples: int
    hx_stderr: float
    hxy_stderr: float
    mi_stderr: float
    pe_stderr: float

    FIELDS = ("hx_bits", "hxy_bits", "mi_bits_per_use", "pe", "n_samples",
              "hx_stderr", "hxy_stderr", "mi_stderr", "pe_stderr")


def _rows(posteriors) -> np.ndarray:
    p = posteriors.probs if isinstance(posteriors, PosteriorEstimate) else posteriors
    p = np.atleast_2d(np.asarray(p, dtype=np.float64))
    if p.shape[0] == 0:
        raise ValueError("need at least one posterior")
    if np.any(p < 0) or not np.all(np.isfinite(p)):
        raise ValueError("posteriors must be finite and non-negative")
    total = p.sum(axis=1, keepdims=True)
    if np.any(total <= 0):
        raise ValueError("posterior rows must have positive mass")
    return p / total


def _plogp(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)


def _mean_se(values: np.ndarray) -> tuple[float, float]:
    n = values.shape[0]
    mean = math.fsum(values) / n
    se = float(np.std(values, ddof=1) / np.sqrt(n)) if n > 1 else 0.0
    return mean, se


def estimate_source_pmf(posteriors) -> np.ndarray:
    """P_X(x_i) ~ (1/N) sum_j P(x_i | y_j)."""
    p = _rows(posteriors)
    return np.array([math.fsum(col) for col in p.T]) / p.shape[0]


def source_entropy(pmf) -> float:
    """Entropy in bits, with 0 log 0 = 0."""
    p = np.asarray(pmf, dtype=np.float64)
    if np.any(p < 0):
        raise ValueError("pmf entries must be non-negative")
    return float(max(0.0, -math.fsum(_plogp(p))))


def conditional_entropy(posteriors) -> float:
    return _conditional_entropy(posteriors)[0]


def _conditional_entropy(posteriors) -> tuple[float, float]:
    per_sample = -_plogp(_rows(posteriors)).sum(axis=1)
    mean, se = _mean_se(per_sample)
    return max(0.0, mean), se


def error_probability(posteriors) -> float:
    """1 - (1/N) sum_j max_i P(x_i | y_j)."""
    return _error_probability(posteriors)[0]


def _error_probability(posteriors) -> tuple[float, float]:
    mean, se = _mean_se(1.0 - _rows(posteriors).max(axis=1))
    return min(1.0, max(0.0, mean)), se


def _source_entropy_se(p: np.ndarray, pmf: np.ndarray) -> float:
    # delta method: dH/dq_i = -(log2 q_i + 1/ln 2)
    with np.errstate(divide="ignore"):
        grad = -(np.log2(np.where(pmf > 0, pmf, 1.0)) + 1.0 / np.log(2.0))
    grad = np.where(pmf > 0, grad, 0.0)
    contrib = p @ grad
    return float(np.std(contrib, ddof=1) / np.sqrt(p.shape[0])) if p.shape[0] > 1 else 0.0


def estimate_rates(posteriors, n: int) -> RateEstimate:
    """All four quantities for a code with ``n`` channel uses per codeword."""
    p = _rows(posteriors)
    pmf = estimate_source_pmf(p)
    hx = source_entropy(pmf)
    hx_se = _source_entropy_se(p, pmf)
    hxy, hxy_se = _conditional_entropy(p)
    pe, pe_se = _error_probability(p)
    mi = (hx - hxy) / n
    return RateEstimate(hx, hxy, mi, pe, p.shape[0], hx_se, hxy_se,
                        float(np.hypot(hx_se, hxy_se) / n), pe_se)
