"""Physics of a single elementary section between neighbouring stations."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

# Multiples of the emitter lifetime to wait for the heralding photon.
WINDOW_LIFETIMES = 5.0


@dataclass(frozen=True)
class LinkParams:
    """Per-section parameters.

    Distances in km, times in s, rates in Hz. ``q`` counts qubit pairs on
    each side of a station, ``mu`` is the post-selected photon fraction.
    """

    L0: float = 25.0
    L_att: float = 25.0
    eta: float = 0.9
    q: int = 10
    mu: float = 1.0
    tau_q: float = 10e-9
    dark_rate: float = 25.0
    fold_capture: bool = False

    def __post_init__(self):
        if not self.L0 > 0:
            raise ValueError(f"L0 must be positive, got {self.L0}")
        if not self.L_att > 0:
            raise ValueError(f"L_att must be positive, got {self.L_att}")
        if not 0.0 <= self.eta <= 1.0:
            raise ValueError(f"eta must lie in [0, 1], got {self.eta}")
        if int(self.q) != self.q or self.q < 1:
            raise ValueError(f"q must be a positive integer, got {self.q}")
        if not 0.0 < self.mu <= 1.0:
            raise ValueError(f"mu must lie in (0, 1], got {self.mu}")
        if not self.tau_q > 0:
            raise ValueError(f"tau_q must be positive, got {self.tau_q}")
        if not self.dark_rate >= 0:
            raise ValueError(f"dark_rate must be non-negative, got {self.dark_rate}")
        object.__setattr__(self, "q", int(self.q))


def waiting_window(tau_q: float) -> float:
    """Detection window after excitation."""
    if not tau_q > 0:
        raise ValueError(f"tau_q must be positive, got {tau_q}")
    return WINDOW_LIFETIMES * tau_q


def capture_probability(tau_q: float) -> float:
    """Chance the emitted photon leaves within the waiting window."""
    return -math.expm1(-waiting_window(tau_q) / tau_q)


def effective_efficiency(p: LinkParams) -> float:
    eff = p.eta * p.mu
    if p.fold_capture:
        eff *= capture_probability(p.tau_q)
    return eff


def pair_success(p: LinkParams) -> float:
    """Success probability of one double-heralding attempt on one qubit pair."""
    return 0.5 * math.exp(-2.0 * p.L0 / p.L_att) * effective_efficiency(p) ** 2


def connection_prob(p: LinkParams) -> float:
    """Probability that at least one of the q pairs connects in one attempt."""
    s = pair_success(p)
    return -math.expm1(p.q * math.log1p(-s))


def dark_count_factor(p: LinkParams) -> float:
    """Probability that neither detector fires spuriously in either heralding round."""
    return math.exp(-4.0 * p.dark_rate * waiting_window(p.tau_q))


def qubits_for_postselect(base: LinkParams, mu: float) -> int:
    """Pairs per side needed at post-selection ``mu`` to match the mu=1 connection rate."""
    if not 0.0 < mu <= 1.0:
        raise ValueError(f"mu must lie in (0, 1], got {mu}")
    reference = connection_prob(replace(base, mu=1.0))
    q = base.q
    while connection_prob(replace(base, mu=mu, q=q)) < reference:
        q += 1
    return q
