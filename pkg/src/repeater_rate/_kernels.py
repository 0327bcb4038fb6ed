"""Hot numeric loops, each in a numba flavour and a vectorised numpy flavour.

The public names at the bottom (``order_stat_means``, ``simulate_sections``)
are bound to one flavour according to :mod:`repeater_rate._accel`. Both
flavours stay importable so they can be benchmarked and cross-checked.
"""
import math

import numpy as np
from scipy.special import gammaln

from ._accel import USE_NUMBA, njit

# SplitMix64 constants (Steele, Lea & Flood 2014).
_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0  # 2**-53

# Safety cap on the t-sum; only reachable for absurdly small p_c.
T_CAP = 50_000_000


def tail_stop(n, p, tol, t_cap=T_CAP):
    """Last step of the truncated t-sum.

    Smallest t with ``n * (1 - F_t) * (t + 1/p) < tol``; this bounds the
    neglected part of every order-statistic mean.
    """
    if p >= 1.0:
        return 1
    logq = math.log1p(-p)
    t = 1
    while t < t_cap:
        if n * math.exp(t * logq) * (t + 1.0 / p) < tol:
            return t
        t += 1
    return t_cap


# ---------------------------------------------------------------------------
# order statistics of n iid geometric variables


@njit(cache=True)
def _binom_cum(n, logc, t, logq, out):
    # out[m] = sum_{j<=m} C(n,j) (1-F_t)^j F_t^(n-j)
    if t == 0:
        for m in range(n + 1):
            out[m] = 0.0
        out[n] = 1.0
        return
    log_surv = t * logq
    if log_surv == -math.inf or math.exp(log_surv) == 0.0:
        for m in range(n + 1):
            out[m] = 1.0
        return
    log_f = math.log(-math.expm1(log_surv))
    acc = 0.0
    for j in range(n + 1):
        acc += math.exp(logc[j] + j * log_surv + (n - j) * log_f)
        out[j] = acc


@njit(cache=True)
def order_stat_means_numba(n, p, t_end):
    """Mean of every order statistic, t-sum truncated after ``t_end`` steps."""
    logc = np.empty(n + 1)
    lg_n = math.lgamma(n + 1.0)
    for j in range(n + 1):
        logc[j] = lg_n - math.lgamma(j + 1.0) - math.lgamma(n - j + 1.0)
    logq = math.log1p(-p) if p < 1.0 else -math.inf
    prev = np.empty(n + 1)
    cur = np.empty(n + 1)
    _binom_cum(n, logc, 0, logq, prev)
    means = np.zeros(n)
    for t in range(1, t_end + 1):
        _binom_cum(n, logc, t, logq, cur)
        for k in range(1, n + 1):
            m = n - k
            means[k - 1] += t * (cur[m] - prev[m])
        for m in range(n + 1):
            prev[m] = cur[m]
    return means


def _binom_cum_numpy(n, logc, t, logq):
    # rows: steps t, cols: m = 0..n
    t = np.asarray(t, dtype=np.float64)[:, None]
    out = np.zeros((t.shape[0], n + 1))
    j = np.arange(n + 1, dtype=np.float64)[None, :]
    zero = t[:, 0] == 0
    out[zero, n] = 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        log_surv = t * logq
        surv = np.exp(log_surv)
        done = (~zero) & (surv[:, 0] == 0.0)
        live = (~zero) & ~done
        log_f = np.log(-np.expm1(log_surv))
        terms = np.exp(logc[None, :] + j * log_surv + (n - j) * log_f)
    out[live] = np.cumsum(terms[live], axis=1)
    out[done] = 1.0
    return out


def order_stat_means_numpy(n, p, t_end, chunk=4096):
    """Vectorised twin of :func:`order_stat_means_numba`."""
    logc = gammaln(n + 1.0) - gammaln(np.arange(n + 1) + 1.0) - gammaln(n - np.arange(n + 1) + 1.0)
    logq = math.log1p(-p) if p < 1.0 else -math.inf
    means = np.zeros(n)
    prev = _binom_cum_numpy(n, logc, [0], logq)[0]
    # columns m = n-k for k = 1..n
    cols = n - np.arange(1, n + 1)
    for start in range(1, t_end + 1, chunk):
        ts = np.arange(start, min(start + chunk, t_end + 1))
        cum = _binom_cum_numpy(n, logc, ts, logq)
        both = np.vstack([prev[None, :], cum])
        diff = np.diff(both, axis=0)[:, cols]
        means += (ts[:, None] * diff).sum(axis=0)
        prev = cum[-1]
    return means


# ---------------------------------------------------------------------------
# counter-based uniforms and the chain Monte Carlo


@njit(cache=True)
def _mix64(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


@njit(cache=True)
def _uniform_numba(key, counter):
    z = _mix64(key + (counter + np.uint64(1)) * _GAMMA)
    return np.float64(z >> _S11) * _INV53


def _mix64_numpy(z):
    z = (z ^ (z >> _S30)) * _MIX1
    z = (z ^ (z >> _S27)) * _MIX2
    return z ^ (z >> _S31)


def seed_key(seed):
    """64-bit stream key for an integer seed."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    z = np.array([seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)
    return _mix64_numpy(z)[0]


def uniforms_numpy(key, counters):
    """Uniform doubles in [0, 1) for the given stream positions."""
    counters = np.asarray(counters, dtype=np.uint64)
    z = _mix64_numpy(key + (counters + np.uint64(1)) * _GAMMA)
    return (z >> _S11).astype(np.float64) * _INV53


@njit(cache=True)
def simulate_sections_numba(n, p, trials, key, k_u, k_l, extra):
    """Sample ``trials`` chains of ``n`` geometric sections.

    Returns per-rank sums and sums of squares of the sorted times, the
    per-trial last completion time and the per-trial decoherence bracket.
    """
    logq = math.log1p(-p) if p < 1.0 else 0.0
    sum_t = np.zeros(n)
    sum_t2 = np.zeros(n)
    t_last = np.empty(trials, dtype=np.int64)
    bracket = np.empty(trials)
    times = np.empty(n)
    nn = np.uint64(n)
    for tr in range(trials):
        base = np.uint64(tr) * nn
        for i in range(n):
            if p >= 1.0:
                t = 1.0
            else:
                u = _uniform_numba(key, base + np.uint64(i))
                t = 1.0 + math.floor(math.log1p(-u) / logq)
            # insertion sort; n is small and the array is rebuilt every trial
            j = i
            while j > 0 and times[j - 1] > t:
                times[j] = times[j - 1]
                j -= 1
            times[j] = t
        for k in range(n):
            sum_t[k] += times[k]
            sum_t2[k] += times[k] * times[k]
        t_last[tr] = np.int64(times[n - 1])
        b = 0.5 * n + times[n - 1] + extra
        for k in range(k_u - 1, n):
            b += times[k]
        for k in range(k_l):
            b -= times[k]
        bracket[tr] = b
    return sum_t, sum_t2, t_last, bracket


def simulate_sections_numpy(n, p, trials, key, k_u, k_l, extra, chunk=8192):
    """Vectorised twin of :func:`simulate_sections_numba`."""
    logq = math.log1p(-p) if p < 1.0 else 0.0
    sum_t = np.zeros(n)
    sum_t2 = np.zeros(n)
    t_last = np.empty(trials, dtype=np.int64)
    bracket = np.empty(trials)
    for start in range(0, trials, chunk):
        stop = min(start + chunk, trials)
        if p >= 1.0:
            times = np.ones((stop - start, n))
        else:
            ctr = (np.arange(start, stop, dtype=np.uint64)[:, None] * np.uint64(n)
                   + np.arange(n, dtype=np.uint64)[None, :])
            u = uniforms_numpy(key, ctr)
            times = 1.0 + np.floor(np.log1p(-u) / logq)
        times.sort(axis=1)
        sum_t += times.sum(axis=0)
        sum_t2 += (times * times).sum(axis=0)
        t_last[start:stop] = times[:, -1].astype(np.int64)
        bracket[start:stop] = (0.5 * n + times[:, -1] + extra
                               + times[:, k_u - 1:].sum(axis=1) - times[:, :k_l].sum(axis=1))
    return sum_t, sum_t2, t_last, bracket


if USE_NUMBA:
    order_stat_means = order_stat_means_numba
    simulate_sections = simulate_sections_numba
    BACKEND = "numba"
else:
    order_stat_means = order_stat_means_numpy
    simulate_sections = simulate_sections_numpy
    BACKEND = "numpy"
