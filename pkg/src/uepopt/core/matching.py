"""
Feature-to-subchannel matching.

Greedy matching pairs the j-th most important feature with the j-th best
subchannel. For any common power and modulation this minimizes the weighted
BER sum (rearrangement inequality, with BER decreasing in SNR).
"""

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from uepopt.core.errors import DomainError
from uepopt.core.importance import ImportanceProfile


@dataclass(frozen=True)
class ChannelState:
    """Per-subchannel normalized SNR, linear scale (1/W)."""

    gammas: tuple[float, ...]
    n_channels: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.gammas:
            raise DomainError("channel state needs at least one subchannel")
        if any(not (g > 0 and math.isfinite(g)) for g in self.gammas):
            raise DomainError("normalized SNRs must be finite and strictly positive")
        object.__setattr__(self, "n_channels", len(self.gammas))

    @classmethod
    def from_values(cls, gammas: Sequence[float]) -> "ChannelState":
        return cls(tuple(float(g) for g in gammas))

    @classmethod
    def from_db(cls, gammas_db: Sequence[float]) -> "ChannelState":
        return cls(tuple(float(10.0 ** (g / 10.0)) for g in gammas_db))

    def as_array(self) -> np.ndarray:
        return np.array(self.gammas, dtype=float)

    def scaled(self, factor: float) -> "ChannelState":
        return ChannelState(tuple(g * factor for g in self.gammas))


@dataclass(frozen=True)
class Matching:
    """
    One-to-one assignment of features to subchannels.

    Attributes:
        permutation: permutation[j] is the channel serving feature j.
        sorted_gammas: sorted_gammas[j] == gammas[permutation[j]].
        feature_order: Features in descending importance rank.
    """

    permutation: tuple[int, ...]
    sorted_gammas: tuple[float, ...]
    feature_order: tuple[int, ...]

    def __post_init__(self) -> None:
        n = len(self.permutation)
        if sorted(self.permutation) != list(range(n)):
            raise DomainError("matching permutation must be a bijection")
        if len(self.sorted_gammas) != n or sorted(self.feature_order) != list(range(n)):
            raise DomainError("matching fields disagree in length")

    def channel_of(self, feature: int) -> int:
        return self.permutation[feature]

    def ranked_gammas(self) -> np.ndarray:
        """Matched SNRs in feature rank order."""
        g = np.array(self.sorted_gammas, dtype=float)
        return g[list(self.feature_order)]


def _check_dimensions(w: ImportanceProfile, ch: ChannelState) -> None:
    if w.n_features != ch.n_channels:
        raise DomainError(
            f"dimension mismatch: {w.n_features} features but {ch.n_channels} subchannels"
        )


def greedy_match(w: ImportanceProfile, ch: ChannelState) -> Matching:
    """
    Assign features to channels by rank.

    Weight ties go to the lower feature index first, SNR ties to the lower
    channel index first, so the output is deterministic.

    Args:
        w: Importance profile; need not be ordered.
        ch: Channel state with the same number of subchannels.

    Returns:
        Matching with the j-th ranked feature on the j-th best channel.

    Raises:
        DomainError: On a dimension mismatch.
    """
    _check_dimensions(w, ch)
    feature_order, _ = w.ranked()
    gammas = ch.as_array()
    channel_order = np.argsort(-gammas, kind="stable")
    permutation = np.empty(w.n_features, dtype=int)
    permutation[feature_order] = channel_order
    return Matching(
        permutation=tuple(int(c) for c in permutation),
        sorted_gammas=tuple(float(g) for g in gammas[permutation]),
        feature_order=tuple(int(f) for f in feature_order),
    )


def identity_match(w: ImportanceProfile, ch: ChannelState) -> Matching:
    """Feature j on channel j, regardless of weights or SNRs."""
    _check_dimensions(w, ch)
    feature_order, _ = w.ranked()
    return Matching(
        permutation=tuple(range(w.n_features)),
        sorted_gammas=ch.gammas,
        feature_order=tuple(int(f) for f in feature_order),
    )
