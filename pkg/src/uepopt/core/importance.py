"""
Semantic importance profiles.

A profile is a strictly positive weight vector over N features, L1
normalized. Profiles come from a weight file (the usual integration point
for weights measured on a trained model), from feature masking against a
task surrogate, or from synthetic generators.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
import pandas as pd

from uepopt.core.errors import DomainError, ProfileFormatError

logger = logging.getLogger(__name__)

TaskSurrogate = Callable[[np.ndarray], float]

NORMALIZATION_TOLERANCE = 1e-12


class ProfileKind(str, Enum):
    """Synthetic profile families."""

    ISFR_GEOMETRIC = "isfr_geometric"
    ISFR_PAPER_LIKE = "isfr_paper_like"
    UNIFORM_NOISY = "uniform_noisy"


DEFAULT_PARAMETERS = {
    ProfileKind.ISFR_GEOMETRIC: 0.5,
    ProfileKind.ISFR_PAPER_LIKE: 150.0,
    ProfileKind.UNIFORM_NOISY: 0.05,
}


@dataclass(frozen=True)
class ImportanceProfile:
    """Normalized, strictly positive importance weights."""

    weights: tuple[float, ...]
    n_features: int = field(init=False)

    def __post_init__(self) -> None:
        if not self.weights:
            raise DomainError("importance profile needs at least one feature")
        if any(not (w > 0 and math.isfinite(w)) for w in self.weights):
            raise DomainError("importance weights must be finite and strictly positive")
        if abs(math.fsum(self.weights) - 1.0) > NORMALIZATION_TOLERANCE:
            raise DomainError("importance weights must sum to 1; use normalize()")
        object.__setattr__(self, "n_features", len(self.weights))

    @property
    def is_ordered(self) -> bool:
        """True iff the weights are strictly descending."""
        return all(a > b for a, b in zip(self.weights, self.weights[1:]))

    def as_array(self) -> np.ndarray:
        return np.array(self.weights, dtype=float)

    def ranked(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Order features by descending weight.

        Ties are broken by ascending feature index.

        Returns:
            Tuple of (feature indices in rank order, weights in rank order).
        """
        w = self.as_array()
        order = np.argsort(-w, kind="stable")
        return order, w[order]


def normalize(raw: Sequence[float]) -> ImportanceProfile:
    """
    L1-normalize raw importance weights.

    Args:
        raw: Raw per-feature contributions, all strictly positive.

    Returns:
        ImportanceProfile summing to 1.

    Raises:
        DomainError: If the vector is empty or any entry is not positive.
    """
    values = np.asarray(raw, dtype=float).ravel()
    if values.size == 0:
        raise DomainError("cannot normalize an empty weight vector")
    if np.any(~np.isfinite(values)) or np.any(values <= 0):
        bad = [int(i) for i in np.flatnonzero(~(values > 0) | ~np.isfinite(values))]
        raise DomainError(f"raw importance weights must be positive; offending features {bad}")
    weights = values / math.fsum(values)
    # one more pass absorbs the rounding of the first division
    weights = weights / math.fsum(weights)
    return ImportanceProfile(tuple(float(w) for w in weights))


def apply_feature_mask(z: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Multiply features by a 0/1 mask along the feature axis (axis 0)."""
    z = np.asarray(z, dtype=float)
    mask = np.asarray(mask, dtype=float)
    shape = (mask.shape[0],) + (1,) * (z.ndim - 1)
    return z * mask.reshape(shape)


def masking_importance(z: np.ndarray, task: TaskSurrogate) -> np.ndarray:
    """
    Raw importance of each feature as the score drop when it is zeroed.

    Weights can come out zero or negative for surrogates where a feature
    does not help; callers must clamp or filter before normalize().

    Args:
        z: Feature array with features along axis 0.
        task: Deterministic scoring function of the whole feature array.

    Returns:
        Raw (unnormalized) weights, one per feature.
    """
    z = np.asarray(z, dtype=float)
    baseline = float(task(z))
    raw = np.empty(z.shape[0], dtype=float)
    for j in range(z.shape[0]):
        mask = np.ones(z.shape[0])
        mask[j] = 0.0
        raw[j] = baseline - float(task(apply_feature_mask(z, mask)))
    return raw


def profile_from_masking(z: np.ndarray, task: TaskSurrogate) -> ImportanceProfile:
    """Masking importance followed by normalization."""
    raw = masking_importance(z, task)
    if np.any(raw <= 0):
        raise DomainError(
            "masking produced non-positive contributions for features "
            f"{[int(i) for i in np.flatnonzero(raw <= 0)]}; clamp or drop them first"
        )
    return normalize(raw)


def synthetic_profile(
    kind: str | ProfileKind,
    n_features: int,
    parameter: float | None = None,
    seed: int = 0,
) -> ImportanceProfile:
    """
    Generate a synthetic importance profile.

    Args:
        kind: isfr_geometric (parameter = decay ratio in (0, 1)),
            isfr_paper_like (parameter = dynamic range w_1/w_N, at least 100)
            or uniform_noisy (parameter = relative jitter in [0, 0.2)).
        n_features: Number of features N >= 1.
        parameter: Family parameter; a per-family default when None.
        seed: Seed for the families that draw random numbers.

    Returns:
        Normalized ImportanceProfile.

    Raises:
        DomainError: On an unknown kind or out-of-range parameter.
    """
    try:
        kind = ProfileKind(kind)
    except ValueError:
        raise DomainError(f"unknown profile kind {kind!r}") from None
    if n_features < 1:
        raise DomainError("n_features must be at least 1")
    if parameter is None:
        parameter = DEFAULT_PARAMETERS[kind]

    rng = np.random.default_rng(seed)
    index = np.arange(n_features, dtype=float)

    if kind is ProfileKind.ISFR_GEOMETRIC:
        if not 0.0 < parameter < 1.0:
            raise DomainError(f"decay ratio must lie in (0, 1), got {parameter}")
        raw = parameter**index
    elif kind is ProfileKind.ISFR_PAPER_LIKE:
        if parameter < 100.0:
            raise DomainError(f"dynamic range must be at least 100, got {parameter}")
        if n_features == 1:
            raw = np.ones(1)
        else:
            # log-linear decay across the range, interior points jittered
            # by less than half a step so the order stays strict
            step = math.log(parameter) / (n_features - 1)
            log_raw = -step * index
            jitter = rng.uniform(-0.4, 0.4, size=n_features) * step
            jitter[0] = jitter[-1] = 0.0
            raw = np.exp(log_raw + jitter)
    else:
        if not 0.0 <= parameter < 0.2:
            raise DomainError(f"relative jitter must lie in [0, 0.2), got {parameter}")
        raw = 1.0 + parameter * rng.uniform(-1.0, 1.0, size=n_features)

    profile = normalize(raw)
    logger.debug("synthetic %s profile N=%d parameter=%s", kind.value, n_features, parameter)
    return profile


def load_profile(path: str | Path) -> ImportanceProfile:
    """
    Read raw weights from a text file and normalize them.

    Accepts one decimal weight per line ('#' starts a comment) or a
    single-column CSV whose header is "weight".

    Raises:
        ProfileFormatError: On a missing, empty or malformed file, or a
            non-positive weight.
    """
    path = Path(path).expanduser()
    if not path.exists():
        raise ProfileFormatError("file not found", str(path))
    try:
        frame = pd.read_csv(
            path,
            header=None,
            comment="#",
            dtype=str,
            skip_blank_lines=True,
            encoding="utf-8",
        )
    except pd.errors.EmptyDataError:
        raise ProfileFormatError("no weights found", str(path)) from None
    except pd.errors.ParserError as exc:
        raise ProfileFormatError(f"malformed file ({exc})", str(path)) from None

    if frame.shape[1] != 1:
        raise ProfileFormatError(f"expected one column, found {frame.shape[1]}", str(path))
    cells = [cell.strip() for cell in frame.iloc[:, 0].astype(str)]
    if cells and cells[0].lower() == "weight":
        cells = cells[1:]
    if not cells:
        raise ProfileFormatError("no weights found", str(path))

    values = []
    for row, cell in enumerate(cells, start=1):
        try:
            value = float(cell)
        except ValueError:
            raise ProfileFormatError(f"not a number: {cell!r}", str(path), row) from None
        if not (value > 0 and math.isfinite(value)):
            raise ProfileFormatError(f"weight must be positive, got {cell}", str(path), row)
        values.append(value)
    return normalize(values)


def save_profile(profile: ImportanceProfile, path: str | Path) -> Path:
    """Write a profile, one weight per line, at full precision."""
    path = Path(path).expanduser()
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = [f"# importance profile, N={profile.n_features}"]
    lines.extend(repr(w) for w in profile.weights)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path
