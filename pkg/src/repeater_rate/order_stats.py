"""Connection times of n sections attempting in parallel.

Each section connects after a geometric number of attempts. The k-th order
statistic ``T_k`` is the step by which k of the n sections have connected.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import binom

from . import _kernels

DEFAULT_TOL = 1e-10


@dataclass(frozen=True)
class AttemptDistribution:
    """Geometric law of the step at which one section connects."""

    p_c: float

    def __post_init__(self):
        if not 0.0 < self.p_c <= 1.0:
            raise ValueError(f"p_c must lie in (0, 1], got {self.p_c}")


def attempt_pmf(d: AttemptDistribution, t: int) -> float:
    """f_t = (1 - p_c)^(t-1) p_c."""
    if t < 1:
        raise ValueError(f"step must be at least 1, got {t}")
    return (1.0 - d.p_c) ** (t - 1) * d.p_c


def attempt_cdf(d: AttemptDistribution, t) -> float:
    """F_t = 1 - (1 - p_c)^t, the chance of having connected by step t."""
    t = np.asarray(t)
    if np.any(t < 0):
        raise ValueError("step must be non-negative")
    if d.p_c == 1.0:
        out = np.where(t >= 1, 1.0, 0.0)
    else:
        out = -np.expm1(t * np.log1p(-d.p_c))
    return float(out) if out.ndim == 0 else out


def max_stat_pmf(n: int, t, d: AttemptDistribution):
    """P(T_n = t) = F_t^n - F_{t-1}^n."""
    if n < 1:
        raise ValueError(f"section count must be at least 1, got {n}")
    t = np.asarray(t)
    if np.any(t < 1):
        raise ValueError("step must be at least 1")
    out = attempt_cdf(d, t) ** n - attempt_cdf(d, t - 1) ** n
    return float(out) if np.ndim(out) == 0 else out


def max_stat_cdf(n: int, t, d: AttemptDistribution):
    """P(T_n <= t) = F_t^n."""
    return attempt_cdf(d, t) ** n


@lru_cache(maxsize=4096)
def _table(n, p_c, tol):
    t_end = _kernels.tail_stop(n, p_c, tol)
    means = np.asarray(_kernels.order_stat_means(n, p_c, t_end), dtype=float)
    means.setflags(write=False)
    return means


def order_stat_table(n: int, d: AttemptDistribution, tol: float = DEFAULT_TOL) -> np.ndarray:
    """<T_k> for k = 1..n (index k-1), each within ``tol`` of the exact mean.

    The infinite t-sum is cut once ``n (1 - F_t) (t + 1/p_c)`` drops below
    ``tol``, which bounds the neglected tail of every rank. The returned
    array is read-only and shared between calls.
    """
    if n < 1:
        raise ValueError(f"section count must be at least 1, got {n}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")
    return _table(int(n), float(d.p_c), float(tol))


def expected_order_stat(n: int, k: int, d: AttemptDistribution, tol: float = DEFAULT_TOL) -> float:
    """<T_k>, the mean step at which the k-th of n sections connects."""
    if not 1 <= k <= n:
        raise ValueError(f"rank k must satisfy 1 <= k <= n, got k={k}, n={n}")
    return float(order_stat_table(n, d, tol)[k - 1])


def order_stat_moments_tail(n: int, d: AttemptDistribution, tol: float = DEFAULT_TOL):
    """Mean and variance of every T_k from binomial tail sums.

    Uses ``P(T_k > t) = P(Binomial(n, F_t) < k)`` with
    ``E[T] = sum_t P(T > t)`` and ``E[T^2] = sum_t (2t + 1) P(T > t)``;
    an independent route to the means of :func:`order_stat_table`.
    """
    t = np.arange(0, _kernels.tail_stop(n, d.p_c, tol) + 1)
    k = np.arange(1, n + 1)
    surv = binom.cdf(k[None, :] - 1, n, np.asarray(attempt_cdf(d, t))[:, None])
    mean = surv.sum(axis=0)
    second = ((2 * t + 1)[:, None] * surv).sum(axis=0)
    return mean, np.maximum(second - mean**2, 0.0)
