"""
Square QAM with per-rail reflected Gray labeling.

A symbol of m bits splits into m/2 bits for the in-phase rail (first half)
and m/2 for the quadrature rail. Each rail's bits are read big-endian as a
Gray code g; with i = gray_to_binary(g) the rail amplitude is (L - 1) - 2i
for L = 2**(m/2) levels. The constellation is scaled to unit average
energy by sqrt(2 (2**m - 1) / 3).

For 16-QAM the per-rail map is 00 -> +3, 01 -> +1, 11 -> -1, 10 -> -3, so
neighbouring amplitudes always differ in exactly one bit.
"""

import math

import numpy as np

from uepopt.core.ber_model import as_mod_order
from uepopt.core.errors import DomainError


def binary_to_gray(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.int64)
    return values ^ (values >> 1)


def gray_to_binary(values: np.ndarray) -> np.ndarray:
    result = np.asarray(values, dtype=np.int64).copy()
    shift = result >> 1
    while np.any(shift):
        result ^= shift
        shift >>= 1
    return result


def pack_bits(bits: np.ndarray) -> np.ndarray:
    """Big-endian integers from the last axis of a 0/1 array."""
    bits = np.asarray(bits, dtype=np.int64)
    weights = 1 << np.arange(bits.shape[-1] - 1, -1, -1, dtype=np.int64)
    return bits @ weights


def unpack_bits(values: np.ndarray, width: int) -> np.ndarray:
    """Big-endian 0/1 array of the given width along a new last axis."""
    values = np.asarray(values, dtype=np.int64)
    shifts = np.arange(width - 1, -1, -1, dtype=np.int64)
    return ((values[..., None] >> shifts) & 1).astype(np.uint8)


def energy_scale(m: int) -> float:
    """Amplitude divisor giving unit average symbol energy."""
    return math.sqrt(2.0 * (2**m - 1) / 3.0)


def _rail_levels(m: int) -> int:
    return 2 ** (m // 2)


def _check_bits(bits: np.ndarray, m: int) -> np.ndarray:
    bits = np.asarray(bits).ravel()
    if bits.size % m:
        raise DomainError(f"{bits.size} bits do not split into {m}-bit symbols")
    if bits.size and (bits.min() < 0 or bits.max() > 1):
        raise DomainError("bits must be 0 or 1")
    return bits.astype(np.int64).reshape(-1, m)


def qam_modulate(bits: np.ndarray, m: int) -> np.ndarray:
    """
    Map bits to unit-energy complex QAM symbols.

    Args:
        bits: Flat 0/1 array; its length must be a multiple of m.
        m: Bits per symbol (2, 4 or 6).

    Returns:
        Complex symbols, one per m bits.

    Raises:
        DomainError: On an unsupported order or misaligned bit count.
    """
    m = int(as_mod_order(m))
    words = _check_bits(bits, m)
    half = m // 2
    top = _rail_levels(m) - 1
    i_rail = top - 2 * gray_to_binary(pack_bits(words[:, :half]))
    q_rail = top - 2 * gray_to_binary(pack_bits(words[:, half:]))
    return (i_rail + 1j * q_rail) / energy_scale(m)


def _slice_rail(x: np.ndarray, m: int) -> np.ndarray:
    top = _rail_levels(m) - 1
    index = np.clip(np.rint((top - x) / 2.0), 0, top).astype(np.int64)
    return unpack_bits(binary_to_gray(index), m // 2)


def qam_demodulate(symbols: np.ndarray, m: int) -> np.ndarray:
    """Hard per-rail decisions back to a flat bit array."""
    m = int(as_mod_order(m))
    scaled = np.asarray(symbols, dtype=complex).ravel() * energy_scale(m)
    bits = np.concatenate([_slice_rail(scaled.real, m), _slice_rail(scaled.imag, m)], axis=1)
    return bits.reshape(-1).astype(np.uint8)


def constellation(m: int) -> np.ndarray:
    """All 2**m points, indexed by the big-endian value of their bit label."""
    m = int(as_mod_order(m))
    labels = unpack_bits(np.arange(2**m), m)
    return qam_modulate(labels.reshape(-1), m)
