"""
Perturbation operators used while training importance-ordered features.

bsc_perturb flips bits independently; ber_matching_perturb gives the i-th
feature the i-th smallest of N uniform BERs so later features learn to
tolerate more errors; nested dropout keeps a random-length prefix of the
features so earlier features carry more information.
"""

from typing import Optional

import numpy as np

from uepopt.core.errors import DomainError
from uepopt.core.importance import apply_feature_mask
from uepopt.sim.link import BitFrame
from uepopt.sim.streams import Stage, stream

DEFAULT_BER_MAX = 0.2


def _check_probability(flip_prob: float, upper: float = 0.5) -> None:
    if not 0.0 <= flip_prob <= upper:
        raise DomainError(f"flip probability must lie in [0, {upper}], got {flip_prob}")


def bsc_perturb(bits: np.ndarray, flip_prob: float, seed: int, feature: int = 0) -> np.ndarray:
    """
    Binary symmetric channel: flip each bit independently with flip_prob.

    Raises:
        DomainError: If flip_prob lies outside [0, 0.5].
    """
    _check_probability(flip_prob)
    bits = np.asarray(bits, dtype=np.uint8)
    flips = stream(seed, feature, Stage.FLIPS).random(bits.shape) < flip_prob
    return bits ^ flips.astype(np.uint8)


def draw_matched_bers(
    n_features: int,
    ber_max: float,
    seed: int,
    size: Optional[int] = None,
) -> np.ndarray:
    """
    N uniform BERs on (0, ber_max), sorted ascending.

    With size, draws that many independent vectors at once, shape (size, N).
    """
    if not 0.0 < ber_max <= 0.5:
        raise DomainError(f"ber_max must lie in (0, 0.5], got {ber_max}")
    if n_features < 1:
        raise DomainError("n_features must be at least 1")
    shape = (n_features,) if size is None else (size, n_features)
    draws = stream(seed, 0, Stage.BER_DRAW).uniform(0.0, ber_max, size=shape)
    return np.sort(draws, axis=-1)


def ber_matching_perturb(
    frame: BitFrame, ber_max: float, seed: int
) -> tuple[BitFrame, np.ndarray]:
    """
    Apply BSC(mu_i) to feature i with mu sorted ascending.

    Returns:
        Tuple of (perturbed frame, BER vector).
    """
    bers = draw_matched_bers(frame.n_features, ber_max, seed)
    rows = [
        bsc_perturb(frame.bits[i], float(mu), seed, feature=i) for i, mu in enumerate(bers)
    ]
    perturbed = np.stack(rows) if rows else frame.bits.copy()
    return BitFrame(perturbed), bers


def nested_dropout_mask(n_features: int, seed: int, size: Optional[int] = None) -> np.ndarray:
    """
    Ones-prefix mask of uniformly random length in {1, ..., N}.

    Feature i (0-based) survives with probability (N - i) / N. With size,
    returns a (size, N) batch of masks.
    """
    if n_features < 1:
        raise DomainError("n_features must be at least 1")
    rng = stream(seed, 0, Stage.DROPOUT)
    kept = rng.integers(1, n_features + 1, size=size)
    idxs = np.arange(n_features)
    return (idxs < np.asarray(kept)[..., None]).astype(np.uint8)


def apply_nested_dropout(features: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Zero the features a dropout mask removes; features along axis 0."""
    mask = np.asarray(mask)
    if mask.ndim != 1 or mask.shape[0] != np.asarray(features).shape[0]:
        raise DomainError("dropout mask must have one entry per feature")
    return apply_feature_mask(features, mask)
