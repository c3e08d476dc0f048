"""Finite-block security calculator for entanglement-based QKD."""

from .bounds import (
    BlockShape,
    BoundUnavailableError,
    SlackParams,
    TailQuery,
    binary_entropy,
    exact_hypergeometric_tail,
    exact_joint_ppe,
    gamma_factor,
    hush_scovel_tail,
    lemma2_ppe_bound,
    lemma2_ppe_detail,
    new_epe,
    serfling_epe,
    serfling_lower_tail,
)
from .optimizer import KeyRateResult, OptimizationPoint, min_block_length, optimize, sweep
from .security import (
    VARIANTS,
    EpsilonBreakdown,
    ProtocolSettings,
    SecurityBudget,
    correctness_bits,
    ec_leakage,
    eps_pa,
    feasible,
    max_ell_at,
    stream_budget,
)
from .simulator import (
    SimConfig,
    SimReport,
    ValidationCase,
    ValidationRow,
    default_validation_grid,
    run,
    validate_bounds,
)

__version__ = "0.1.0"

__all__ = [
    "BlockShape",
    "BoundUnavailableError",
    "SlackParams",
    "TailQuery",
    "binary_entropy",
    "exact_hypergeometric_tail",
    "exact_joint_ppe",
    "gamma_factor",
    "hush_scovel_tail",
    "lemma2_ppe_bound",
    "lemma2_ppe_detail",
    "new_epe",
    "serfling_epe",
    "serfling_lower_tail",
    "KeyRateResult",
    "OptimizationPoint",
    "min_block_length",
    "optimize",
    "sweep",
    "VARIANTS",
    "EpsilonBreakdown",
    "ProtocolSettings",
    "SecurityBudget",
    "correctness_bits",
    "ec_leakage",
    "eps_pa",
    "feasible",
    "max_ell_at",
    "stream_budget",
    "SimConfig",
    "SimReport",
    "ValidationCase",
    "ValidationRow",
    "default_validation_grid",
    "run",
    "validate_bounds",
    "__version__",
]
