"""
Approximate bit error rate of Gray-coded square QAM.

The per-feature BER over an equalized fading subchannel is modelled as

    mu(m, p, gamma) = a * erfc(sqrt(d*p*gamma)) + b * erfc(c * sqrt(d*p*gamma))

with constants fixed by the modulation order m (bits per symbol). The power
solver needs the first derivative in p; the second derivative is exposed so
tests can check convexity.

All functions accept scalars or numpy arrays and broadcast.
"""

import math
from dataclasses import dataclass
from enum import IntEnum
from functools import lru_cache
from typing import Union

import numpy as np
from scipy import special

from uepopt.core.errors import DomainError

ArrayLike = Union[float, np.ndarray]

# Factor inside the second erfc term; identical for every order.
C_FACTOR = 3.0


class ModOrder(IntEnum):
    """Supported square QAM orders, valued in bits per symbol."""

    QPSK = 2
    QAM16 = 4
    QAM64 = 6


MOD_ORDERS: tuple[int, ...] = tuple(int(m) for m in ModOrder)


@dataclass(frozen=True)
class BerCoefficients:
    """Constants of the two-term BER approximation for one order."""

    a: float
    b: float
    c: float
    d: float


def as_mod_order(m: int) -> ModOrder:
    """Validate a modulation order given as bits per symbol."""
    try:
        return ModOrder(int(m))
    except (TypeError, ValueError):
        raise DomainError(f"modulation order must be one of {MOD_ORDERS}, got {m!r}") from None


@lru_cache(maxsize=None)
def _coefficients(m: int) -> BerCoefficients:
    root_m = math.sqrt(2.0**m)
    scale = root_m * math.log2(root_m)
    return BerCoefficients(
        a=(root_m - 1.0) / scale,
        b=(root_m - 2.0) / scale,
        c=C_FACTOR,
        d=3.0 / (2.0 * (2.0**m - 1.0)),
    )


def coefficients(m: int) -> BerCoefficients:
    """
    Return the BER constants (a, b, c, d) for a modulation order.

    Args:
        m: Bits per symbol, one of 2, 4, 6.

    Returns:
        BerCoefficients for the order.

    Raises:
        DomainError: If m is not a supported order.
    """
    return _coefficients(int(as_mod_order(m)))


def coefficient_arrays(orders) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Vectors (a, b, d) for a sequence of orders."""
    coeffs = [coefficients(m) for m in orders]
    return (
        np.array([cf.a for cf in coeffs], dtype=float),
        np.array([cf.b for cf in coeffs], dtype=float),
        np.array([cf.d for cf in coeffs], dtype=float),
    )


def erfc(x: ArrayLike) -> ArrayLike:
    """Complementary error function, 1 - erf(x)."""
    return special.erfc(x)


def _check_power_snr(p: ArrayLike, gamma: ArrayLike, strict_power: bool) -> None:
    p_arr = np.asarray(p, dtype=float)
    g_arr = np.asarray(gamma, dtype=float)
    if strict_power:
        if np.any(~(p_arr > 0)):
            raise DomainError("power must be strictly positive for the derivative")
    elif np.any(~(p_arr >= 0)):
        raise DomainError("power must be non-negative")
    if np.any(~(g_arr > 0)):
        raise DomainError("normalized SNR must be strictly positive")


def _scalar_or_array(value: np.ndarray) -> ArrayLike:
    return float(value) if np.ndim(value) == 0 else value


def ber(m: int, p: ArrayLike, gamma: ArrayLike) -> ArrayLike:
    """
    Approximate BER of order m at power p over normalized SNR gamma.

    Depends on p and gamma only through p*gamma. At p = 0 the value is a + b,
    which exceeds 0.5 for 16- and 64-QAM; no clamping is applied here.

    Raises:
        DomainError: On an invalid order, negative power or non-positive SNR.
    """
    cf = coefficients(m)
    _check_power_snr(p, gamma, strict_power=False)
    x = np.sqrt(cf.d * np.asarray(p, dtype=float) * np.asarray(gamma, dtype=float))
    value = cf.a * special.erfc(x) + cf.b * special.erfc(cf.c * x)
    return _scalar_or_array(value)


def ber_array(orders, powers: np.ndarray, gammas: np.ndarray) -> np.ndarray:
    """Elementwise BER for per-feature orders, powers and SNRs."""
    a, b, d = coefficient_arrays(orders)
    powers = np.asarray(powers, dtype=float)
    gammas = np.asarray(gammas, dtype=float)
    _check_power_snr(powers, gammas, strict_power=False)
    x = np.sqrt(d * powers * gammas)
    return a * special.erfc(x) + b * special.erfc(C_FACTOR * x)


def ber_power_derivative(m: int, p: ArrayLike, gamma: ArrayLike) -> ArrayLike:
    """
    Partial derivative of ber() with respect to power.

    Strictly negative for p > 0; singular at p = 0.

    Raises:
        DomainError: If p <= 0 or gamma <= 0.
    """
    cf = coefficients(m)
    _check_power_snr(p, gamma, strict_power=True)
    p = np.asarray(p, dtype=float)
    dg = cf.d * np.asarray(gamma, dtype=float)
    value = -np.sqrt(dg / (math.pi * p)) * (
        cf.a * np.exp(-dg * p) + cf.b * cf.c * np.exp(-(cf.c**2) * dg * p)
    )
    return _scalar_or_array(value)


def ber_power_second_derivative(m: int, p: ArrayLike, gamma: ArrayLike) -> ArrayLike:
    """Second derivative of ber() in power; strictly positive for p > 0."""
    cf = coefficients(m)
    _check_power_snr(p, gamma, strict_power=True)
    p = np.asarray(p, dtype=float)
    v = cf.d * np.asarray(gamma, dtype=float)

    def term(u: float) -> np.ndarray:
        return (
            u * np.sqrt(v) / math.sqrt(math.pi)
            * np.exp(-(u**2) * v * p)
            * (0.5 / p**1.5 + u**2 * v / np.sqrt(p))
        )

    value = cf.a * term(1.0) + cf.b * term(cf.c)
    return _scalar_or_array(value)


def clamp_flip_probability(mu: ArrayLike) -> ArrayLike:
    """Clamp a model BER to [0, 0.5] for use as a bit-flip probability."""
    return _scalar_or_array(np.clip(np.asarray(mu, dtype=float), 0.0, 0.5))
