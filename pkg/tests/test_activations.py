import math

import numpy as np
import pytest

from mtrnnlab.activations import (
    KAPPA_H,
    KAPPA_W,
    bounded_sigmoid,
    bounded_sigmoid_deriv,
    softmax,
)


def test_sigmoid_centre():
    assert bounded_sigmoid(0.0) == pytest.approx(0.5, abs=1e-15)


def test_sigmoid_saturation_limits():
    assert bounded_sigmoid(50.0) == pytest.approx(1.0 + KAPPA_H, abs=1e-12)
    assert bounded_sigmoid(-50.0) == pytest.approx(-KAPPA_H, abs=1e-12)


def test_sigmoid_finite_everywhere():
    x = np.array([-1e6, -700.0, 0.0, 700.0, 1e6])
    y = bounded_sigmoid(x)
    assert np.all(np.isfinite(y))
    assert np.all((y > -KAPPA_H - 1e-12) & (y < 1.0 + KAPPA_H + 1e-12))


def test_sigmoid_derivative_at_zero():
    expected = (1.0 + 2.0 * KAPPA_H) * KAPPA_W * 0.25
    assert bounded_sigmoid_deriv(0.0) == pytest.approx(expected, abs=1e-12)
    assert bounded_sigmoid_deriv(0.0) == pytest.approx(0.39466, abs=5e-6)


@pytest.mark.parametrize("x", [-3.0, -0.7, 0.0, 0.9, 2.5])
def test_sigmoid_derivative_matches_finite_difference(x):
    h = 1e-6
    fd = (bounded_sigmoid(x + h) - bounded_sigmoid(x - h)) / (2.0 * h)
    assert bounded_sigmoid_deriv(x) == pytest.approx(fd, abs=1e-8)


@pytest.mark.parametrize("n", [2, 5, 44])
def test_softmax_uniform(n):
    y = softmax(np.zeros(n))
    assert np.allclose(y, 1.0 / n, atol=1e-15)
    assert np.sum(y) == pytest.approx(1.0, abs=1e-12)


def test_softmax_peak_scaling():
    # a single peak of ln(387) over 43 silent channels normalises to 0.9
    z = np.zeros(44)
    z[0] = math.log(387.0)
    y = softmax(z)
    assert y[0] == pytest.approx(387.0 / 430.0, abs=1e-12)
    assert y[0] == pytest.approx(0.9, abs=1e-12)


def test_softmax_shift_invariance_no_overflow():
    y = softmax(np.array([1000.0, 1000.0]))
    assert np.allclose(y, [0.5, 0.5], atol=1e-15)
