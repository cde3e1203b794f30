"""
Modulation order search space.

With importance and matched SNR both descending, optimal orders are
non-decreasing along the feature rank, and the rate budget is best used with
the smallest achievable bit total that still meets the average-rate
constraint. Under both rules a candidate is fixed by its counts
(n2, n4, n6), so the candidate set has at most k + 1 members.
"""

import itertools
import logging
from dataclasses import dataclass

from uepopt.core.ber_model import MOD_ORDERS, as_mod_order
from uepopt.core.errors import DomainError, InfeasibleError

logger = logging.getLogger(__name__)

RATE_TOLERANCE = 1e-9


@dataclass(frozen=True, order=True)
class ModVector:
    """Per-feature modulation orders for the k retained features, in rank order."""

    orders: tuple[int, ...]

    def __post_init__(self) -> None:
        for m in self.orders:
            as_mod_order(m)

    @classmethod
    def from_counts(cls, n2: int, n4: int, n6: int) -> "ModVector":
        return cls((2,) * n2 + (4,) * n4 + (6,) * n6)

    @property
    def k(self) -> int:
        return len(self.orders)

    @property
    def counts(self) -> tuple[int, int, int]:
        return tuple(self.orders.count(m) for m in MOD_ORDERS)  # type: ignore[return-value]

    @property
    def total_bits(self) -> int:
        return sum(self.orders)

    @property
    def is_monotone(self) -> bool:
        return all(a <= b for a, b in zip(self.orders, self.orders[1:]))

    def meets_rate(self, n_features: int, m_min: float) -> bool:
        return self.total_bits >= required_bits(self.k, n_features, m_min) - RATE_TOLERANCE


def required_bits(k: int, n_features: int, m_min: float) -> float:
    """Bit total the k retained features must reach: k * (m_min * k / N)."""
    _check_k(k, n_features)
    if m_min < 0:
        raise DomainError(f"rate budget must be non-negative, got {m_min}")
    return m_min * k * k / n_features


def _check_k(k: int, n_features: int) -> None:
    if not 1 <= k <= n_features:
        raise DomainError(f"retained feature count must lie in [1, {n_features}], got {k}")


def _minimal_sum(k: int, n_features: int, m_min: float) -> int:
    required = required_bits(k, n_features, m_min)
    lowest, highest = min(MOD_ORDERS) * k, max(MOD_ORDERS) * k
    if required > highest + RATE_TOLERANCE:
        raise InfeasibleError(
            f"k={k} features cannot carry {required:.3f} bits with orders up to {max(MOD_ORDERS)}",
            constraint="C3",
        )
    for total in range(lowest, highest + 1, 2):
        if total >= required - RATE_TOLERANCE:
            return total
    raise InfeasibleError("no achievable bit total", constraint="C3")  # pragma: no cover


def _vectors_with_sum(k: int, total: int) -> list[ModVector]:
    # n4 + 2*n6 is the excess over an all-QPSK vector, in units of 2 bits
    excess = (total - 2 * k) // 2
    vectors = []
    for n6 in range(excess // 2 + 1):
        n4 = excess - 2 * n6
        n2 = k - n4 - n6
        if n2 >= 0:
            vectors.append(ModVector.from_counts(n2, n4, n6))
    return vectors


def candidate_set(k: int, n_features: int, m_min: float) -> list[ModVector]:
    """
    Pruned modulation candidates for k retained features.

    Args:
        k: Retained features, 1 <= k <= N.
        n_features: Total features N.
        m_min: Average rate budget in bits per symbol.

    Returns:
        All non-decreasing vectors over {2, 4, 6} whose bit total is the
        smallest achievable total meeting the rate constraint, in ascending
        lexicographic order. Never empty.

    Raises:
        InfeasibleError: If no vector can meet the rate constraint (C3).
    """
    total = _minimal_sum(k, n_features, m_min)
    vectors = sorted(_vectors_with_sum(k, total))
    logger.debug("k=%d: %d candidates with %d bits", k, len(vectors), total)
    return vectors


def candidate_count_bound(k: int) -> int:
    """Upper bound on len(candidate_set(k, ...)) for three orders."""
    if k < 1:
        raise DomainError("k must be at least 1")
    return k + 1


def all_feasible_vectors(
    k: int,
    n_features: int,
    m_min: float,
    monotone: bool = True,
) -> list[ModVector]:
    """
    Every rate-feasible vector, without the minimal-sum pruning.

    Args:
        k: Retained features.
        n_features: Total features N.
        m_min: Average rate budget.
        monotone: Restrict to non-decreasing vectors (one per count triple);
            otherwise enumerate all 3**k vectors.

    Returns:
        Feasible vectors in ascending lexicographic order (may be empty).
    """
    required = required_bits(k, n_features, m_min)
    if monotone:
        pool = (
            ModVector(combo)
            for combo in itertools.combinations_with_replacement(MOD_ORDERS, k)
        )
    else:
        pool = (ModVector(combo) for combo in itertools.product(MOD_ORDERS, repeat=k))
    return sorted(v for v in pool if v.total_bits >= required - RATE_TOLERANCE)


def uniform_order(k: int, n_features: int, m_min: float) -> int:
    """Smallest single order that meets the rate constraint when used by all k features."""
    per_feature = required_bits(k, n_features, m_min) / k
    for m in MOD_ORDERS:
        if m >= per_feature - RATE_TOLERANCE:
            return m
    raise InfeasibleError(
        f"average rate {per_feature:.3f} exceeds the largest order {max(MOD_ORDERS)}",
        constraint="C3",
    )
