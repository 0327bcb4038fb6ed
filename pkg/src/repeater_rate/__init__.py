"""Secret key rates of double-heralded quantum repeater chains."""
from ._kernels import BACKEND
from .distill import (
    DistillationUnreachable,
    DistillSchedule,
    DistilledKeyRate,
    compute_breakpoints,
    dejmps_map,
    distill_success_prob,
    distilled_key_rate,
    werner_replace,
)
from .keyrate import (
    ChainParams,
    KeyRateResult,
    decoherence_factor,
    normalized_rate,
    optimize_l0,
    secret_key_rate,
)
from .link import LinkParams, connection_prob, dark_count_factor, qubits_for_postselect, waiting_window
from .oracle import dejmps_oracle, simulate_chain
from .order_stats import (
    AttemptDistribution,
    attempt_cdf,
    attempt_pmf,
    expected_order_stat,
    max_stat_pmf,
    order_stat_table,
)
from .states import (
    BellDiagonalState,
    ErrorFactors,
    binary_entropy,
    compose_error_factors,
    secret_fraction,
    secret_fraction_literal,
    werner_state,
)

__version__ = "0.1.0"
