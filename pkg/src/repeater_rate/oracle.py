"""Independent checks of the analytic model.

``simulate_chain`` samples the connection process directly and
``dejmps_oracle`` runs distillation on explicit 16x16 density matrices.
Neither calls into the closed-form code paths they are used to check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import reduce

import numpy as np

from . import _kernels
from .order_stats import AttemptDistribution, order_stat_moments_tail
from .states import BellDiagonalState, bell_basis

# ---------------------------------------------------------------------------
# chain Monte Carlo


@dataclass(frozen=True)
class ChainSample:
    """Empirical statistics of ``trials`` simulated chains."""

    n: int
    p_c: float
    trials: int
    seed: int
    mean_t: np.ndarray  # <T_k>, k = 1..n
    stderr_t: np.ndarray
    t_last: np.ndarray  # T_n of every trial
    bracket: np.ndarray  # odd-first idle exposure of every trial, in steps

    @property
    def mean_bracket(self) -> float:
        return float(self.bracket.mean())

    @property
    def stderr_bracket(self) -> float:
        return float(self.bracket.std(ddof=1) / math.sqrt(self.trials)) if self.trials > 1 else 0.0

    def completion(self, t_f: int) -> float:
        """Empirical P(T_n <= t_f)."""
        return float(np.mean(self.t_last <= t_f))

    def cdf_last(self, t) -> np.ndarray:
        """Empirical CDF of T_n at the given steps."""
        srt = np.sort(self.t_last)
        return np.searchsorted(srt, np.asarray(t), side="right") / self.trials


def sample_sections(n: int, p_c: float, trials: int, seed: int = 0, extra_n_term: bool = False) -> ChainSample:
    """Draw ``trials`` independent chains of ``n`` geometric sections.

    Uniforms come from SplitMix64 evaluated at position ``trial * n + section``
    of the stream keyed by ``seed``, so any trial can be regenerated on its own.
    """
    if trials < 1:
        raise ValueError(f"trials must be at least 1, got {trials}")
    if n < 1:
        raise ValueError(f"section count must be at least 1, got {n}")
    if not 0.0 < p_c <= 1.0:
        raise ValueError(f"p_c must lie in (0, 1], got {p_c}")
    k_u = math.ceil((n + 1) / 2 + 1)
    k_l = (n + 1) // 2
    key = _kernels.seed_key(seed)
    sum_t, sum_t2, t_last, bracket = _kernels.simulate_sections(
        n, float(p_c), trials, key, k_u, k_l, float(n if extra_n_term else 0.0)
    )
    mean = sum_t / trials
    if trials > 1:
        var = np.maximum(sum_t2 - trials * mean**2, 0.0) / (trials - 1)
    else:
        var = np.zeros(n)
    return ChainSample(
        n=n,
        p_c=float(p_c),
        trials=trials,
        seed=seed,
        mean_t=mean,
        stderr_t=np.sqrt(var / trials),
        t_last=np.asarray(t_last),
        bracket=np.asarray(bracket),
    )


def order_stat_z(sample: ChainSample, analytic) -> np.ndarray:
    """Standardised gap between empirical and analytic <T_k>.

    When every draw of a rank is identical the sample variance is zero and
    the model variance, from binomial tail sums, sets the standard error.
    """
    _, model_var = order_stat_moments_tail(sample.n, AttemptDistribution(sample.p_c))
    se = np.where(sample.stderr_t > 0, sample.stderr_t, np.sqrt(model_var / sample.trials))
    gap = np.abs(sample.mean_t - np.asarray(analytic))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(se > 0, gap / se, np.where(gap <= 1e-9, 0.0, np.inf))
    return z


@dataclass(frozen=True)
class ChainSimulation:
    sample: ChainSample
    t_f: int
    completion_fraction: float
    raw_rate: float
    x_de: float


def simulate_chain(p, trials: int, seed: int = 0, t_f: int | None = None) -> ChainSimulation:
    """Monte Carlo counterpart of the undistilled chain analysis.

    ``t_f`` defaults to ``ceil(empirical <T_n>)``, the buffer-free cut-off.
    """
    s = sample_sections(p.n, p.p_c, trials, seed, p.extra_n_term)
    if t_f is None:
        t_f = int(math.ceil(s.mean_t[-1]))
    completion = s.completion(t_f)
    raw = completion / (t_f * p.step_time())
    x_de = math.exp(-(2.0 * p.link.L0 / (p.c * p.tau_d)) * s.mean_bracket)
    return ChainSimulation(sample=s, t_f=t_f, completion_fraction=completion, raw_rate=raw, x_de=x_de)


def ks_distance_last(sample: ChainSample) -> float:
    """Largest gap between the empirical CDF of T_n and F_t^n."""
    t = np.arange(1, int(sample.t_last.max()) + 1)
    if sample.p_c == 1.0:
        exact = np.ones_like(t, dtype=float)
    else:
        exact = (-np.expm1(t * math.log1p(-sample.p_c))) ** sample.n
    return float(np.max(np.abs(sample.cdf_last(t) - exact)))


# ---------------------------------------------------------------------------
# DEJMPS on explicit density matrices

_I2 = np.eye(2, dtype=complex)
_X = np.array([[0, 1], [1, 0]], dtype=complex)
_P0 = np.diag([1, 0]).astype(complex)
_P1 = np.diag([0, 1]).astype(complex)

# qubit order A1, B1, A2, B2; qubit 0 is the most significant bit


def _kron(*ops):
    return reduce(np.kron, ops)


def _rx(theta):
    return math.cos(theta / 2) * _I2 - 1j * math.sin(theta / 2) * _X


def _cnot(control, target, nq=4):
    a = [_I2] * nq
    b = [_I2] * nq
    a[control] = _P0
    b[control] = _P1
    b[target] = _X
    return _kron(*a) + _kron(*b)


_ROTATE = _kron(_rx(math.pi / 2), _rx(-math.pi / 2), _rx(math.pi / 2), _rx(-math.pi / 2))
_BILATERAL_CNOT = _cnot(0, 2) @ _cnot(1, 3)
_DEJMPS = _BILATERAL_CNOT @ _ROTATE
# targets (A2, B2) both 0 or both 1
_KEEP = [_kron(_I2, _I2, _P0, _P0), _kron(_I2, _I2, _P1, _P1)]


def _check_density(rho, dim):
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"expected a {dim}x{dim} matrix, got {rho.shape}")
    if not np.allclose(rho, rho.conj().T, atol=1e-12):
        raise ValueError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-12:
        raise ValueError("density matrix does not have unit trace")
    if np.linalg.eigvalsh(rho).min() < -1e-12:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def pair_product(rho_a, rho_b) -> np.ndarray:
    """Joint state of two pairs in qubit order A1, B1, A2, B2."""
    return np.kron(rho_a, rho_b)


def _trace_targets(rho16):
    r = rho16.reshape(4, 4, 4, 4)  # (A1B1, A2B2, A1B1', A2B2')
    return np.einsum("ajbj->ab", r)


def dejmps_density(rho16):
    """One DEJMPS round on a 4-qubit state.

    Returns the unnormalised control-pair state kept on matching target
    outcomes; its trace is the success probability.
    """
    rho16 = _check_density(rho16, 16)
    rho = _DEJMPS @ rho16 @ _DEJMPS.conj().T
    kept = sum(P @ rho @ P for P in _KEEP)
    return _trace_targets(kept)


def bell_diagonal(rho4) -> np.ndarray:
    """Diagonal of a 2-qubit state in the Bell basis (phi+, phi-, psi+, psi-)."""
    B = bell_basis()
    return np.real(np.einsum("ia,ab,ib->i", B.conj(), rho4, B))


def bell_offdiagonal_norm(rho4) -> float:
    B = bell_basis()
    m = B.conj() @ rho4 @ B.T
    return float(np.abs(m - np.diag(np.diag(m))).max())


def dejmps_oracle(a: BellDiagonalState, b: BellDiagonalState):
    """Distil pair ``a`` (control) with pair ``b`` (target) by brute force."""
    rho_a = _check_density(a.density_matrix(), 4)
    rho_b = _check_density(b.density_matrix(), 4)
    kept = dejmps_density(pair_product(rho_a, rho_b))
    success = float(np.trace(kept).real)
    if success <= 1e-12:  # zero up to rounding of the 16x16 products
        raise ValueError("distillation cannot succeed for these inputs")
    w = bell_diagonal(kept / success)
    return BellDiagonalState.from_unnormalized(w), success
