"""
uepopt - Importance-aware unequal error protection for digital feature links.

Allocates subchannels, feature truncation, QAM orders and transmit power so
that the features a downstream task depends on most are protected best,
and simulates the resulting link bit by bit.
"""

__version__ = "0.1.0"

from uepopt.core.importance import ImportanceProfile, synthetic_profile
from uepopt.core.matching import ChannelState
from uepopt.core.solver import ResourceBudget, SolveOptions, Strategy, solve, solve_ophd

__all__ = [
    "ChannelState",
    "ImportanceProfile",
    "ResourceBudget",
    "SolveOptions",
    "Strategy",
    "solve",
    "solve_ophd",
    "synthetic_profile",
    "__version__",
]
