"""
Bit-exact link simulation.

The chain is quantize -> bits -> QAM -> fading + AWGN -> zero-forcing
equalization -> hard demodulation -> bits -> de-quantize. Randomness comes
from the seeded per-feature streams in uepopt.sim.streams.
"""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from uepopt.core.ber_model import as_mod_order, ber_array
from uepopt.core.errors import DomainError, ProfileFormatError
from uepopt.core.importance import ImportanceProfile
from uepopt.core.solver import DEFAULT_DISCARD_PENALTY, AllocationPlan
from uepopt.sim.qam import (
    binary_to_gray,
    gray_to_binary,
    pack_bits,
    qam_demodulate,
    qam_modulate,
    unpack_bits,
)
from uepopt.sim.streams import Stage, stream

logger = logging.getLogger(__name__)

DEFAULT_N_BITS = 2


@dataclass(frozen=True)
class Quantizer:
    """Scalar quantizer with strictly increasing levels, 2**n_bits of them."""

    levels: tuple[float, ...]
    n_bits: int = field(init=False)

    def __post_init__(self) -> None:
        count = len(self.levels)
        if count < 2 or count & (count - 1):
            raise DomainError(f"level count must be a power of two >= 2, got {count}")
        if any(not math.isfinite(v) for v in self.levels):
            raise DomainError("quantizer levels must be finite")
        if any(b <= a for a, b in zip(self.levels, self.levels[1:])):
            raise DomainError("quantizer levels must be strictly increasing")
        object.__setattr__(self, "n_bits", count.bit_length() - 1)

    @classmethod
    def uniform(cls, n_bits: int = DEFAULT_N_BITS, scale: float = 1.0) -> "Quantizer":
        """Zero-mean, unit-spaced levels times scale, e.g. {-1.5, -0.5, 0.5, 1.5} for 2 bits."""
        if n_bits < 1:
            raise DomainError("n_bits must be at least 1")
        if not scale > 0:
            raise DomainError(f"scale must be positive, got {scale}")
        count = 2**n_bits
        return cls(tuple(float((i - (count - 1) / 2.0) * scale) for i in range(count)))

    @property
    def thresholds(self) -> np.ndarray:
        levels = np.array(self.levels)
        return 0.5 * (levels[:-1] + levels[1:])

    def quantize(self, y) -> np.ndarray:
        """
        Nearest-level indices; a value exactly on a threshold goes to the lower level.

        Raises:
            DomainError: If any value is not finite.
        """
        y = np.asarray(y, dtype=float)
        if not np.all(np.isfinite(y)):
            raise DomainError("cannot quantize non-finite values")
        return np.searchsorted(self.thresholds, y, side="left")

    def dequantize(self, indices) -> np.ndarray:
        indices = np.asarray(indices, dtype=np.int64)
        if indices.size and (indices.min() < 0 or indices.max() >= len(self.levels)):
            raise DomainError("level index out of range")
        return np.array(self.levels)[indices]


def load_levels(path: str | Path) -> Quantizer:
    """
    Read quantizer levels, one real per line, strictly increasing.

    Raises:
        ProfileFormatError: On a missing or malformed file.
    """
    path = Path(path).expanduser()
    if not path.exists():
        raise ProfileFormatError("file not found", str(path))
    try:
        frame = pd.read_csv(path, header=None, comment="#", dtype=str, encoding="utf-8")
    except pd.errors.EmptyDataError:
        raise ProfileFormatError("no levels found", str(path)) from None
    levels = []
    for row, cell in enumerate(frame.iloc[:, 0].astype(str), start=1):
        try:
            levels.append(float(cell.strip()))
        except ValueError:
            raise ProfileFormatError(f"not a number: {cell!r}", str(path), row) from None
    try:
        return Quantizer(tuple(levels))
    except DomainError as exc:
        raise ProfileFormatError(str(exc), str(path)) from None


def bits_from_levels(indices, n_bits: int, gray: bool = False) -> np.ndarray:
    """
    Encode level indices as bits, big-endian, n_bits per index.

    An (N, L) index array becomes an (N, L * n_bits) bit array.
    """
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size and (indices.min() < 0 or indices.max() >= 2**n_bits):
        raise DomainError(f"index out of range for {n_bits} bits")
    if gray:
        indices = binary_to_gray(indices)
    bits = unpack_bits(indices, n_bits)
    return bits.reshape(indices.shape[:-1] + (-1,)) if indices.ndim else bits


def levels_from_bits(bits, n_bits: int, gray: bool = False) -> np.ndarray:
    """Inverse of bits_from_levels along the last axis."""
    bits = np.asarray(bits, dtype=np.int64)
    if bits.shape[-1] % n_bits:
        raise DomainError(f"{bits.shape[-1]} bits are not a multiple of {n_bits}")
    words = bits.reshape(bits.shape[:-1] + (-1, n_bits))
    indices = pack_bits(words)
    return gray_to_binary(indices) if gray else indices


@dataclass(frozen=True, eq=False)
class BitFrame:
    """Bits of N features, one row per feature."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        bits = np.asarray(self.bits)
        if bits.ndim != 2:
            raise DomainError("a bit frame is a 2-D array, features by bits")
        if bits.size and not np.isin(bits, (0, 1)).all():
            raise DomainError("bit frame entries must be 0 or 1")
        object.__setattr__(self, "bits", bits.astype(np.uint8))

    @property
    def n_features(self) -> int:
        return self.bits.shape[0]


@dataclass(frozen=True)
class FadingChannel:
    """Block-fading subchannel with coefficient h and complex noise variance."""

    h: complex
    noise_variance: float
    seed: int = 0

    def __post_init__(self) -> None:
        if not abs(self.h) > 0:
            raise DomainError("channel coefficient must be non-zero")
        if not self.noise_variance > 0:
            raise DomainError(f"noise variance must be positive, got {self.noise_variance}")

    @property
    def gamma(self) -> float:
        """Normalized SNR |h|^2 / sigma^2."""
        return abs(self.h) ** 2 / self.noise_variance

    @classmethod
    def from_gamma(
        cls, gamma: float, noise_variance: float = 1.0, seed: int = 0, feature: int = 0
    ) -> "FadingChannel":
        """Channel with the given normalized SNR and a seeded uniform phase."""
        if not gamma > 0:
            raise DomainError(f"normalized SNR must be positive, got {gamma}")
        phase = stream(seed, feature, Stage.PHASE).uniform(0.0, 2.0 * math.pi)
        magnitude = math.sqrt(gamma * noise_variance)
        return cls(complex(magnitude * np.exp(1j * phase)), noise_variance, seed)


def transmit(
    symbols: np.ndarray,
    p: float,
    ch: FadingChannel,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """
    Send symbols at power p and equalize: (conj(h)/|h|^2) * (sqrt(p) h s + n).

    Without an explicit generator the noise comes from the channel's seed.
    """
    if p < 0:
        raise DomainError(f"transmit power must be non-negative, got {p}")
    symbols = np.asarray(symbols, dtype=complex)
    if rng is None:
        rng = stream(ch.seed, 0, Stage.NOISE)
    sigma = math.sqrt(ch.noise_variance / 2.0)
    noise = sigma * (rng.standard_normal(symbols.shape) + 1j * rng.standard_normal(symbols.shape))
    received = math.sqrt(p) * ch.h * symbols + noise
    return received * np.conj(ch.h) / abs(ch.h) ** 2


def _send_bits(bits: np.ndarray, m: int, p: float, ch: FadingChannel, rng) -> np.ndarray:
    padding = (-bits.size) % m
    padded = np.concatenate([bits, np.zeros(padding, dtype=bits.dtype)])
    equalized = transmit(qam_modulate(padded, m), p, ch, rng)
    if p > 0:
        equalized = equalized / math.sqrt(p)
    return qam_demodulate(equalized, m)[: bits.size]


def simulate_ber(m: int, p: float, gamma: float, n_bits: int, seed: int = 0) -> float:
    """Empirical BER of Gray QAM with random payload bits at power p over SNR gamma."""
    m = int(as_mod_order(m))
    if n_bits < 1:
        raise DomainError("n_bits must be at least 1")
    payload = stream(seed, 0, Stage.PAYLOAD).integers(0, 2, size=n_bits, dtype=np.uint8)
    ch = FadingChannel.from_gamma(gamma, 1.0, seed)
    received = _send_bits(payload, m, p, ch, stream(seed, 0, Stage.NOISE))
    return float(np.count_nonzero(received != payload)) / n_bits


def synthetic_features(n_features: int, length: int, seed: int = 0) -> np.ndarray:
    """Standard Gaussian feature matrix, N x L."""
    if n_features < 1 or length < 1:
        raise DomainError("feature matrix dimensions must be positive")
    return stream(seed, 0, Stage.FEATURES).standard_normal((n_features, length))


def load_features(path: str | Path) -> np.ndarray:
    """Read an N x L real feature matrix from a headerless CSV."""
    path = Path(path).expanduser()
    if not path.exists():
        raise ProfileFormatError("file not found", str(path))
    try:
        frame = pd.read_csv(path, header=None, comment="#")
    except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
        raise ProfileFormatError(f"malformed feature matrix ({exc})", str(path)) from None
    values = frame.to_numpy(dtype=float)
    if not np.all(np.isfinite(values)):
        raise ProfileFormatError("feature matrix contains non-finite values", str(path))
    return values


@dataclass(frozen=True)
class MeasuredReport:
    """
    Outcome of one end-to-end run.

    Per-feature arrays are in the plan's rank order and cover retained
    features only; reconstruction has zeros in discarded rows.
    """

    per_feature_ber: tuple[float, ...]
    analytic_ber: tuple[float, ...]
    bits_sent: tuple[int, ...]
    bit_errors: tuple[int, ...]
    transmission_term: float
    truncation_term: float
    total_j: float
    reconstruction: np.ndarray = field(repr=False, compare=False)


def end_to_end_run(
    features: np.ndarray,
    plan: AllocationPlan,
    w: ImportanceProfile,
    q: Quantizer,
    channels: Sequence[FadingChannel],
    seed: int = 0,
    d_t: float = DEFAULT_DISCARD_PENALTY,
    gray: bool = False,
) -> MeasuredReport:
    """
    Run the full digital chain for every retained feature of a plan.

    Args:
        features: N x L real feature matrix.
        plan: Allocation plan over the same N features.
        w: Importance profile used to weight the empirical BERs.
        q: Quantizer for the feature values.
        channels: One channel per subchannel index; feature f uses
            channels[plan.matching.channel_of(f)].
        seed: Noise seed; feature f draws from its own stream.
        d_t: Distortion charged per unit weight of a discarded feature.
        gray: Gray-code the quantization indices instead of natural binary.

    Returns:
        MeasuredReport with empirical and analytic per-feature BERs.
    """
    features = np.asarray(features, dtype=float)
    n = w.n_features
    if features.ndim != 2 or features.shape[0] != n:
        raise DomainError(f"expected a feature matrix with {n} rows, got shape {features.shape}")
    if len(channels) != n or plan.n_features != n:
        raise DomainError("plan, channels and profile disagree on N")

    indices = q.quantize(features)
    recovered = np.zeros_like(features)
    errors, sent, measured = [], [], []
    for rank, f in enumerate(plan.retained):
        bits = bits_from_levels(indices[f], q.n_bits, gray)
        ch = channels[plan.matching.channel_of(f)]
        rng = stream(seed, f, Stage.NOISE)
        rx = _send_bits(bits, plan.orders[rank], plan.powers[rank], ch, rng)
        count = int(np.count_nonzero(rx != bits))
        errors.append(count)
        sent.append(int(bits.size))
        measured.append(count / bits.size)
        recovered[f] = q.dequantize(levels_from_bits(rx, q.n_bits, gray))

    gammas = np.array([channels[plan.matching.channel_of(f)].gamma for f in plan.retained])
    analytic = ber_array(plan.orders, np.array(plan.powers), gammas)
    weights = w.as_array()
    transmission = math.fsum(weights[f] * b for f, b in zip(plan.retained, measured))
    truncation = math.fsum(weights[f] * d_t for f in plan.discarded)
    logger.debug("end-to-end run: %d bit errors over %d bits", sum(errors), sum(sent))
    return MeasuredReport(
        per_feature_ber=tuple(measured),
        analytic_ber=tuple(float(b) for b in analytic),
        bits_sent=tuple(sent),
        bit_errors=tuple(errors),
        transmission_term=transmission,
        truncation_term=truncation,
        total_j=transmission + truncation,
        reconstruction=recovered,
    )
