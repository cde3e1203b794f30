"""Core allocation model: BER approximation, importance, matching, modulation, power, solver."""

from uepopt.core.ber_model import MOD_ORDERS, ModOrder, ber, ber_power_derivative, coefficients
from uepopt.core.errors import (
    ConfigError,
    DomainError,
    InfeasibleError,
    NumericalError,
    ProfileFormatError,
    UepError,
)
from uepopt.core.importance import (
    ImportanceProfile,
    ProfileKind,
    load_profile,
    masking_importance,
    normalize,
    synthetic_profile,
)
from uepopt.core.matching import ChannelState, Matching, greedy_match, identity_match
from uepopt.core.modulation import ModVector, candidate_set
from uepopt.core.power import PowerVector, allocate, waterfill
from uepopt.core.solver import (
    AllocationPlan,
    DistortionReport,
    ResourceBudget,
    SolveOptions,
    SolveStats,
    Strategy,
    audit_constraints,
    exhaustive_oracle,
    objective,
    solve,
    solve_baseline,
    solve_ophd,
)

__all__ = [
    "MOD_ORDERS",
    "AllocationPlan",
    "ChannelState",
    "ConfigError",
    "DistortionReport",
    "DomainError",
    "ImportanceProfile",
    "InfeasibleError",
    "Matching",
    "ModOrder",
    "ModVector",
    "NumericalError",
    "PowerVector",
    "ProfileFormatError",
    "ProfileKind",
    "ResourceBudget",
    "SolveOptions",
    "SolveStats",
    "Strategy",
    "UepError",
    "allocate",
    "audit_constraints",
    "ber",
    "ber_power_derivative",
    "candidate_set",
    "coefficients",
    "exhaustive_oracle",
    "greedy_match",
    "identity_match",
    "load_profile",
    "masking_importance",
    "normalize",
    "objective",
    "solve",
    "solve_baseline",
    "solve_ophd",
    "synthetic_profile",
    "waterfill",
]
