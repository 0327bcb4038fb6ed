"""Blind DEJMPS distillation and the distilled key-rate lower bound.

Above ``n_L`` sections the chain is distilled once, then again after every
further ``n_S`` sections. After each round the state is replaced by the
Werner state of equal fidelity, and the Werner parameter is pinned at the
distillation threshold. This yields a lower bound on the key rate.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Optional

from .keyrate import ChainParams, chain_werner_param, raw_rate_scan, secret_key_rate
from .link import dark_count_factor
from .states import BellDiagonalState, binary_entropy, werner_state

# Werner parameters (not fidelities) at which distillation is scheduled.
X_DISTILL = 0.69
X_BLOCK = 0.93
ROUNDED_SURVIVAL = 0.37
N_SCAN_MAX = 100_000


class DistillationUnreachable(ValueError):
    """The chain degrades past the threshold before any schedule can close."""


def dejmps_map(a: BellDiagonalState, b: BellDiagonalState):
    """One DEJMPS round on Bell-diagonal pairs; ``a`` is kept on success.

    The local rotations swap the phi- and psi- weights, so the parity check
    groups (phi+, psi-) against (psi+, phi-).
    """
    a1, a2, a3, a4 = a.weights
    b1, b2, b3, b4 = b.weights
    success = (a1 + a4) * (b1 + b4) + (a2 + a3) * (b2 + b3)
    if success <= 0.0:
        raise ValueError("distillation cannot succeed for these inputs")
    out = (
        a1 * b1 + a4 * b4,
        a1 * b4 + a4 * b1,
        a3 * b3 + a2 * b2,
        a3 * b2 + a2 * b3,
    )
    return BellDiagonalState.from_unnormalized(out), success


def distill_success_prob(s: BellDiagonalState) -> float:
    """Success probability when two identical copies of ``s`` are distilled."""
    w1, w2, w3, w4 = s.weights
    return (w1 + w4) ** 2 + (w2 + w3) ** 2


def werner_replace(s: BellDiagonalState) -> float:
    """Werner parameter with the same psi+ fidelity, floored at 0."""
    return min(1.0, max(0.0, (4.0 * s.fidelity - 1.0) / 3.0))


def round_survival(rounded_survival: bool = False) -> float:
    """Fraction of initial pairs left after one round at the threshold state."""
    if rounded_survival:
        return ROUNDED_SURVIVAL
    return distill_success_prob(werner_state(X_DISTILL)) / 2.0


@dataclass(frozen=True)
class DistillSchedule:
    """``n_L is None`` means the chain never reaches the distillation threshold."""

    n_L: Optional[int]
    n_S: Optional[int]
    survival: float

    @property
    def needed(self) -> bool:
        return self.n_L is not None

    def rounds(self, n: int) -> int:
        if self.n_L is None or n < self.n_L:
            return 0
        return -(-(n - self.n_L + 1) // self.n_S)

    def to_dict(self) -> dict:
        return asdict(self)


def _noiseless(p: ChainParams) -> bool:
    return p.x_mm == 1.0 and p.x_ga == 1.0 and dark_count_factor(p.link) == 1.0 and math.isinf(p.tau_d)


def _block_factor(p: ChainParams, m: int) -> float:
    # m appended sections cost m gates: m-1 inside the block, one to join it
    return chain_werner_param(p.with_n(m)) * p.x_ga


def _last_above(f, threshold: float, n_max: int) -> Optional[int]:
    """Largest n with f(n) >= threshold for non-increasing f; None if f(n_max) still passes."""
    if f(1) < threshold:
        return 0
    lo, hi = 1, 2
    while hi <= n_max and f(hi) >= threshold:
        lo, hi = hi, hi * 2
    if hi > n_max:
        if f(n_max) >= threshold:
            return None
        hi = n_max
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if f(mid) >= threshold:
            lo = mid
        else:
            hi = mid
    return lo


def compute_breakpoints(p: ChainParams, n_max: int = N_SCAN_MAX) -> DistillSchedule:
    """Section counts at which distillation is scheduled.

    ``n_L`` is the largest chain whose Werner parameter stays at or above
    0.69. ``n_S`` is the largest block whose appended degradation stays at
    or above 0.93, so a distilled 0.74 pair drops back to about 0.69.
    """
    survival = round_survival(p.rounded_survival)
    if _noiseless(p):
        return DistillSchedule(None, None, survival)
    n_L = _last_above(lambda n: chain_werner_param(p.with_n(n)), X_DISTILL, n_max)
    if n_L == 0:
        raise DistillationUnreachable(
            f"a single section already has x = {chain_werner_param(p.with_n(1)):.4f} < {X_DISTILL}"
        )
    if n_L is None:
        return DistillSchedule(None, None, survival)
    n_S = _last_above(lambda m: _block_factor(p, m), X_BLOCK, n_max)
    if n_S == 0:
        raise DistillationUnreachable(
            f"appending one section already degrades x by {_block_factor(p, 1):.4f} < {X_BLOCK}"
        )
    if n_S is None:
        n_S = n_max
    return DistillSchedule(n_L, n_S, survival)


@dataclass(frozen=True)
class DistilledKeyRate:
    K: float
    K_literal: float
    K_raw: float
    rounds: int
    survival: float
    bracket: float
    bracket_literal: float
    n_L: int
    n_S: int

    def to_dict(self) -> dict:
        return asdict(self)


def threshold_bracket(base=2) -> float:
    """Unclamped secret fraction of a Werner pair pinned at the threshold."""
    return 1.0 - 2.0 * binary_entropy((1.0 - X_DISTILL) / 2.0, base)


def distilled_key_rate(p: ChainParams, n: Optional[int] = None, schedule: Optional[DistillSchedule] = None) -> DistilledKeyRate:
    """Lower bound on the distilled key rate for a chain of ``n`` sections.

    ``K`` uses the bracket floored at zero; ``K_literal`` keeps its sign.
    The raw rate is that of the full n-section chain.
    """
    n = p.n if n is None else n
    chain = p.with_n(n)
    if schedule is None:
        schedule = compute_breakpoints(chain)
    if schedule.n_L is None or n < schedule.n_L:
        raise ValueError(f"n = {n} is below the distillation threshold n_L = {schedule.n_L}")
    _, _, raw = raw_rate_scan(chain)
    k_raw = float(raw.max())
    rounds = schedule.rounds(n)
    lit = threshold_bracket(chain.entropy_base)
    factor = k_raw * schedule.survival**rounds
    return DistilledKeyRate(
        K=factor * max(0.0, lit),
        K_literal=factor * lit,
        K_raw=k_raw,
        rounds=rounds,
        survival=schedule.survival,
        bracket=max(0.0, lit),
        bracket_literal=lit,
        n_L=schedule.n_L,
        n_S=schedule.n_S,
    )


def chain_key_rate(p: ChainParams, distill: bool = False):
    """Undistilled rate, or the distilled bound once the chain reaches n_L.

    Returns (K, detail) where detail is the underlying result object.
    """
    if distill:
        try:
            schedule = compute_breakpoints(p)
        except DistillationUnreachable:
            schedule = None
        if schedule is not None and schedule.needed and p.n >= schedule.n_L:
            r = distilled_key_rate(p, schedule=schedule)
            return r.K, r
    r = secret_key_rate(p)
    return r.K, r
