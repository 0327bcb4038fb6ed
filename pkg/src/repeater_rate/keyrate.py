"""End-to-end secret key rate of an undistilled repeater chain."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, replace
from typing import Callable, Optional, Sequence

import numpy as np

from .link import LinkParams, connection_prob, dark_count_factor
from .order_stats import AttemptDistribution, max_stat_cdf, order_stat_table
from .states import (
    ErrorFactors,
    compose_error_factors,
    secret_fraction,
    secret_fraction_literal,
)

C_FIBER = 2.0e5  # km/s
STEP_CONVENTIONS = ("one_way", "round_trip")
QUBIT_CONVENTIONS = {
    # every station, endpoints included, holds q pairs on each of two sides
    "two_sided": lambda q, n: 2 * q * (n + 1),
    # q pairs per station
    "one_sided": lambda q, n: q * (n + 1),
    # q pairs at each end of every section
    "per_section": lambda q, n: 2 * q * n,
}


@dataclass(frozen=True)
class ChainParams:
    """Chain of ``n`` identical sections plus the analysis conventions.

    ``step`` sets the duration of one attempt in the raw rate: ``one_way``
    is L0/c, ``round_trip`` is 2 L0/c. ``extra_n_term`` adds a further n to
    the decoherence exposure. ``rounded_survival`` rounds the distillation
    survival to 0.37.
    """

    link: LinkParams = field(default_factory=LinkParams)
    n: int = 1
    tau_d: float = 1.0
    c: float = C_FIBER
    x_ga: float = 1.0
    x_mm: float = 0.999
    delta_max: int = 10
    entropy_base: object = 2
    step: str = "one_way"
    extra_n_term: bool = False
    rounded_survival: bool = False
    pc_override: Optional[float] = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ValueError(f"n must be a positive integer, got {self.n}")
        object.__setattr__(self, "n", int(self.n))
        if not self.tau_d > 0:
            raise ValueError(f"tau_d must be positive, got {self.tau_d}")
        if not self.c > 0:
            raise ValueError(f"c must be positive, got {self.c}")
        for name in ("x_ga", "x_mm"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if int(self.delta_max) != self.delta_max or self.delta_max < 0:
            raise ValueError(f"delta_max must be a non-negative integer, got {self.delta_max}")
        object.__setattr__(self, "delta_max", int(self.delta_max))
        if self.step not in STEP_CONVENTIONS:
            raise ValueError(f"step must be one of {STEP_CONVENTIONS}, got {self.step!r}")
        if self.pc_override is not None and not 0.0 <= self.pc_override <= 1.0:
            raise ValueError(f"pc_override must lie in [0, 1], got {self.pc_override}")

    @property
    def L0(self) -> float:
        return self.link.L0

    @property
    def p_c(self) -> float:
        if self.pc_override is not None:
            return self.pc_override
        return connection_prob(self.link)

    def with_n(self, n: int) -> "ChainParams":
        return replace(self, n=n)

    def with_l0(self, L0: float, n: int) -> "ChainParams":
        return replace(self, link=replace(self.link, L0=L0), n=n)

    def step_time(self) -> float:
        """Duration of one attempt in seconds."""
        one_way = self.link.L0 / self.c
        return 2.0 * one_way if self.step == "round_trip" else one_way


@dataclass(frozen=True)
class KeyRateResult:
    raw_rate: float
    completion_fraction: float
    x_total: float
    secret_fraction: float
    K: float
    delta_opt: int
    t_f: int
    p_c: float = float("nan")
    mean_t_n: float = float("nan")
    x_dc: float = 1.0
    x_mm: float = 1.0
    x_ga: float = 1.0
    x_de: float = 1.0
    secret_fraction_literal: float = float("nan")
    k_scan: tuple = ()

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("k_scan")
        return d


def _tables(p: ChainParams):
    p_c = p.p_c
    if p_c <= 0.0:
        raise ValueError("connection probability is zero; no key can be generated")
    d = AttemptDistribution(p_c)
    return d, order_stat_table(p.n, d)


def _bracket_limits(n: int):
    k_u = math.ceil((n + 1) / 2 + 1)
    k_l = (n + 1) // 2
    return k_u, k_l


def decoherence_bracket(n: int, means, extra_n_term: bool = False) -> float:
    """Idle exposure, in steps, of the chain when odd-numbered sections connect first."""
    means = np.asarray(means, dtype=float)
    if means.shape != (n,):
        raise ValueError(f"need <T_k> for k = 1..{n}, got {means.shape[0] if means.ndim else 0} values")
    k_u, k_l = _bracket_limits(n)
    b = n / 2 + means[n - 1] + means[k_u - 1:].sum() - means[:k_l].sum()
    if extra_n_term:
        b += n
    return float(b)


def decoherence_factor(p: ChainParams, stats=None) -> float:
    """Survival probability of the stored nuclear-spin entanglement."""
    if stats is None:
        _, stats = _tables(p)
    bracket = decoherence_bracket(p.n, stats, p.extra_n_term)
    return math.exp(-(2.0 * p.link.L0 / (p.c * p.tau_d)) * bracket)


def naive_decoherence_factor(p: ChainParams) -> float:
    """Decoherence if every section connected at the same moment."""
    return math.exp(-p.n * p.link.L0 / (p.c * p.tau_d))


def error_factors(p: ChainParams, stats=None) -> ErrorFactors:
    return ErrorFactors(
        x_dc=dark_count_factor(p.link),
        x_mm=p.x_mm,
        x_ga=p.x_ga,
        x_de=decoherence_factor(p, stats),
    )


def chain_werner_param(p: ChainParams, stats=None) -> float:
    return compose_error_factors(error_factors(p, stats), p.n)


def raw_rate_scan(p: ChainParams):
    """Raw rate for every buffer delta = 0..delta_max.

    Returns (t_f, completion fraction, raw rate in Hz), one entry per delta.
    """
    d, stats = _tables(p)
    mean_t_n = stats[p.n - 1]
    t_f = np.ceil(mean_t_n + np.arange(p.delta_max + 1)).astype(np.int64)
    completion = np.asarray(max_stat_cdf(p.n, t_f, d), dtype=float)
    raw = completion / (t_f * p.step_time())
    return t_f, completion, raw


def secret_key_rate(p: ChainParams) -> KeyRateResult:
    """Secret key rate maximised over the buffer delta."""
    d, stats = _tables(p)
    factors = error_factors(p, stats)
    x_total = compose_error_factors(factors, p.n)
    sf_lit = secret_fraction_literal(x_total, p.entropy_base)
    sf = max(0.0, sf_lit)
    t_f, completion, raw = raw_rate_scan(p)
    k_scan = raw * sf
    i = int(np.argmax(k_scan))
    return KeyRateResult(
        raw_rate=float(raw[i]),
        completion_fraction=float(completion[i]),
        x_total=x_total,
        secret_fraction=sf,
        K=float(k_scan[i]),
        delta_opt=i,
        t_f=int(t_f[i]),
        p_c=d.p_c,
        mean_t_n=float(stats[p.n - 1]),
        x_dc=factors.x_dc**p.n,
        x_mm=factors.x_mm**p.n,
        x_ga=factors.x_ga ** (p.n - 1),
        x_de=factors.x_de,
        secret_fraction_literal=sf_lit,
        k_scan=tuple(float(v) for v in k_scan),
    )


def sections_for(total_distance: float, L0: float) -> int:
    """Nearest whole number of sections; leftover distance is ignored."""
    return int(math.floor(total_distance / L0 + 0.5))


def optimize_l0(
    template: ChainParams,
    total_distance: float,
    l0_grid: Sequence[float],
    rate_fn: Callable[[ChainParams], object] = secret_key_rate,
):
    """Best inter-repeater spacing on ``l0_grid`` for a fixed total distance.

    ``rate_fn`` maps a chain to any result carrying a ``K`` attribute.
    Candidates that would give fewer than one section are skipped. Ties go
    to the earlier grid entry.
    """
    if len(l0_grid) == 0:
        raise ValueError("L0 grid is empty")
    best = None
    for L0 in l0_grid:
        n = sections_for(total_distance, L0)
        if n < 1:
            continue
        result = rate_fn(template.with_l0(L0, n))
        if best is None or result.K > best[1].K:
            best = (L0, result)
    if best is None:
        raise ValueError(f"no L0 in the grid gives at least one section over {total_distance} km")
    return best


def qubit_count(p: ChainParams, convention: str = "two_sided") -> int:
    try:
        return QUBIT_CONVENTIONS[convention](p.link.q, p.n)
    except KeyError:
        raise ValueError(f"unknown qubit counting convention {convention!r}") from None


def normalized_rate(r, p: ChainParams, convention: str = "two_sided") -> float:
    """Key rate per qubit (Hz/qubit)."""
    return r.K / qubit_count(p, convention)
