"""Tests for the two-term QAM BER approximation."""

import math

import numpy as np
import pytest

from uepopt.core.ber_model import (
    MOD_ORDERS,
    ber,
    ber_array,
    ber_power_derivative,
    ber_power_second_derivative,
    clamp_flip_probability,
    coefficients,
    erfc,
)
from uepopt.core.errors import DomainError


@pytest.mark.parametrize(
    "m, expected",
    [
        (2, (0.5, 0.0, 3.0, 0.5)),
        (4, (3 / 8, 1 / 4, 3.0, 0.1)),
        (6, (7 / 24, 1 / 4, 3.0, 3 / 126)),
    ],
)
def test_coefficients(m, expected):
    cf = coefficients(m)
    assert (cf.a, cf.b, cf.c, cf.d) == pytest.approx(expected, rel=1e-14, abs=1e-15)


@pytest.mark.parametrize("m", [0, 1, 3, 8, "qam"])
def test_coefficients_reject_unknown_order(m):
    with pytest.raises(DomainError):
        coefficients(m)


def test_ber_reference_values():
    assert ber(2, 2.0, 1.0) == pytest.approx(0.5 * math.erfc(1.0), rel=1e-14)
    assert ber(2, 2.0, 1.0) == pytest.approx(0.078650, abs=1e-6)
    assert ber(2, 0.0, 1.0) == 0.5
    assert ber(4, 1e6, 1e3) == pytest.approx(0.0, abs=1e-300)


def test_ber_depends_only_on_product():
    for m in MOD_ORDERS:
        assert ber(m, 2.0, 3.0) == pytest.approx(ber(m, 3.0, 2.0), rel=1e-14)


@pytest.mark.parametrize("m", MOD_ORDERS)
def test_ber_strictly_decreasing_in_power_and_snr(m):
    grid = np.geomspace(1e-2, 30.0, 60)
    by_power = ber_array((m,) * len(grid), grid, np.ones_like(grid))
    by_snr = ber_array((m,) * len(grid), np.ones_like(grid), grid)
    assert np.all(np.diff(by_power) < 0)
    assert np.all(np.diff(by_snr) < 0)


def test_ber_increasing_in_order_above_unit_snr():
    for snr in np.geomspace(1.0, 30.0, 40):
        values = [ber(m, 1.0, snr) for m in MOD_ORDERS]
        assert values[0] < values[1] < values[2]


def test_ber_zero_power_exceeds_half_for_dense_orders():
    cf = coefficients(4)
    assert ber(4, 0.0, 1.0) == pytest.approx(cf.a + cf.b)
    assert ber(4, 0.0, 1.0) > 0.5


@pytest.mark.parametrize("p, gamma", [(-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_ber_domain(p, gamma):
    with pytest.raises(DomainError):
        ber(2, p, gamma)


def test_ber_array_matches_scalar():
    orders = (2, 4, 6)
    powers = np.array([0.5, 1.0, 3.0])
    gammas = np.array([2.0, 7.0, 40.0])
    values = ber_array(orders, powers, gammas)
    for i, m in enumerate(orders):
        assert values[i] == pytest.approx(ber(m, powers[i], gammas[i]), rel=1e-15)


@pytest.mark.parametrize("m", MOD_ORDERS)
@pytest.mark.parametrize("p, gamma", [(0.5, 2.0), (1.0, 0.5), (2.0, 4.0), (3.0, 10.0)])
def test_derivative_matches_finite_difference(m, p, gamma):
    h = 1e-6 * p
    numeric = (ber(m, p + h, gamma) - ber(m, p - h, gamma)) / (2 * h)
    assert ber_power_derivative(m, p, gamma) == pytest.approx(numeric, rel=1e-5)


def test_derivative_closed_form_for_qpsk():
    p, gamma = 1.3, 2.1
    expected = -0.5 * math.sqrt(0.5 * gamma / (math.pi * p)) * math.exp(-0.5 * gamma * p)
    assert ber_power_derivative(2, p, gamma) == pytest.approx(expected, rel=1e-13)


def test_derivative_singular_at_zero_power():
    with pytest.raises(DomainError):
        ber_power_derivative(2, 0.0, 1.0)


@pytest.mark.parametrize("m", MOD_ORDERS)
def test_marginal_decreasing_and_convex(m):
    grid = np.geomspace(1e-3, 50.0, 200)
    marginal = -ber_power_derivative(m, grid, 1.7)
    assert np.all(np.diff(marginal) < 0)
    assert np.all(ber_power_second_derivative(m, grid, 1.7) > 0)


@pytest.mark.parametrize("m", MOD_ORDERS)
def test_second_derivative_matches_finite_difference(m):
    p, gamma = 1.5, 2.5
    h = 1e-5 * p
    numeric = (ber_power_derivative(m, p + h, gamma) - ber_power_derivative(m, p - h, gamma)) / (
        2 * h
    )
    assert ber_power_second_derivative(m, p, gamma) == pytest.approx(numeric, rel=1e-6)


def test_erfc_reference_points():
    assert erfc(0.0) == 1.0
    assert erfc(1.0) == pytest.approx(0.15729920705, rel=1e-10)
    x = np.linspace(-4, 4, 33)
    assert np.allclose(erfc(x) + erfc(-x), 2.0, atol=1e-15)


def test_clamp_flip_probability():
    assert clamp_flip_probability(0.625) == 0.5
    assert clamp_flip_probability(-1e-18) == 0.0
    assert clamp_flip_probability(0.1) == 0.1
