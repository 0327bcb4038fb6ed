"""Bell-diagonal states, binary entropy and the secret fraction."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Weight order used everywhere in the package.
BELL_LABELS = ("phi+", "phi-", "psi+", "psi-")
TARGET = 2  # index of psi+, the state the chain is meant to deliver

_WEIGHT_TOL = 1e-12


def _entropy_base(base) -> float:
    if base in ("e", "E", "ln", "nat"):
        return math.e
    base = float(base)
    if not base > 1.0:
        raise ValueError(f"entropy base must exceed 1, got {base}")
    return base


@dataclass(frozen=True)
class BellDiagonalState:
    """Mixture of the four Bell states, weights ordered (phi+, phi-, psi+, psi-)."""

    weights: tuple

    def __post_init__(self):
        w = tuple(float(v) for v in self.weights)
        if len(w) != 4:
            raise ValueError("a Bell-diagonal state needs exactly four weights")
        if any(not math.isfinite(v) or v < -_WEIGHT_TOL or v > 1 + _WEIGHT_TOL for v in w):
            raise ValueError(f"Bell weights must lie in [0, 1], got {w}")
        if abs(math.fsum(w) - 1.0) > _WEIGHT_TOL:
            raise ValueError(f"Bell weights must sum to 1, got sum {math.fsum(w)!r}")
        object.__setattr__(self, "weights", tuple(min(max(v, 0.0), 1.0) for v in w))

    @classmethod
    def from_unnormalized(cls, weights) -> "BellDiagonalState":
        w = np.clip(np.asarray(weights, dtype=float), 0.0, None)
        return cls(tuple(w / w.sum()))

    @property
    def fidelity(self) -> float:
        """Overlap with psi+."""
        return self.weights[TARGET]

    def as_array(self) -> np.ndarray:
        return np.array(self.weights)

    def density_matrix(self) -> np.ndarray:
        """4x4 matrix in the computational basis |00>, |01>, |10>, |11>."""
        kets = bell_basis()
        return sum(w * np.outer(k, k.conj()) for w, k in zip(self.weights, kets))


def bell_basis() -> np.ndarray:
    """Rows are |phi+>, |phi->, |psi+>, |psi-> in the computational basis."""
    s = 1 / math.sqrt(2)
    return np.array(
        [
            [s, 0, 0, s],
            [s, 0, 0, -s],
            [0, s, s, 0],
            [0, s, -s, 0],
        ],
        dtype=complex,
    )


@dataclass(frozen=True)
class ErrorFactors:
    """Per-component success probabilities entering the final Werner parameter."""

    x_dc: float = 1.0
    x_mm: float = 1.0
    x_ga: float = 1.0
    x_de: float = 1.0

    def __post_init__(self):
        for name in ("x_dc", "x_mm", "x_ga", "x_de"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")


def _check_x(x):
    if not 0.0 <= x <= 1.0:
        raise ValueError(f"Werner parameter must lie in [0, 1], got {x}")


def werner_state(x: float) -> BellDiagonalState:
    """``x |psi+><psi+| + (1 - x) I/4`` as a Bell-diagonal state."""
    _check_x(x)
    other = (1.0 - x) / 4.0
    # psi+ weight is 1 - 3*other so the weights sum to 1 in floating point
    return BellDiagonalState((other, other, 1.0 - 3.0 * other, other))


def werner_fidelity(x: float) -> float:
    return (1.0 + 3.0 * x) / 4.0


def binary_entropy(p: float, base=2) -> float:
    """h(p) = -p log p - (1-p) log(1-p), with 0 log 0 = 0."""
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"probability must lie in [0, 1], got {p}")
    b = _entropy_base(base)
    if p == 0.0 or p == 1.0:
        return 0.0
    h = -p * math.log(p) - (1.0 - p) * math.log1p(-p)
    return h / math.log(b)


def secret_fraction_literal(x: float, base=2) -> float:
    """Unclamped ``1 - 2 h((1 - x)/2)``; negative when no key can be distilled."""
    _check_x(x)
    return 1.0 - 2.0 * binary_entropy((1.0 - x) / 2.0, base)


def secret_fraction(x: float, base=2) -> float:
    """Key bits per raw bit for a Werner state, floored at zero."""
    return max(0.0, secret_fraction_literal(x, base))


def compose_error_factors(factors: ErrorFactors, n: int) -> float:
    """Werner parameter of an n-section chain: ``x_dc^n x_mm^n x_ga^(n-1) x_de``."""
    if n < 1:
        raise ValueError(f"section count must be at least 1, got {n}")
    return factors.x_dc**n * factors.x_mm**n * factors.x_ga ** (n - 1) * factors.x_de
