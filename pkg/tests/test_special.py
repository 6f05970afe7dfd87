import math

import numpy as np
import pytest
from scipy import special as sp

from monoclifford.special import (
    bessel_k,
    bessel_k_half_integer,
    bessel_k_integral,
    bessel_k_recursion_residual,
    gamma_fn,
)

# Reference values from mpmath.besselk at 25 digits, frozen here.
REFERENCE = [
    (0.5, 1.0, 0.461068504447894558),
    (1.5, 2.0, 0.179906657952092171),
    (1.0, 2.0, 0.139865881816522427),
    (0.0, 1.0, 0.421024438240708333),
    (2.5, 0.3, 75.1521401643748905),
    (1.0, 1e-5, 99999.9999393557069),
    (3.0, 10.0, 2.72527002565986921e-5),
    (6.0, 50.0, 4.86872070253754038e-23),
    (0.3, 1e-6, 116.164630606269119),
    (6.0, 1e-2, 3839980800059999.35),
    (2.0, 1e-6, 1999999999999.50018),
    (1.0, 0.1, 9.85384478087060557),
    (2.0, 3.0, 0.0615104584717420377),
]


@pytest.mark.parametrize("p,t,expected", REFERENCE)
def test_reference_values(p, t, expected):
    assert bessel_k(p, t) == pytest.approx(expected, rel=1e-10)


def test_closed_forms():
    assert bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) / math.e, rel=1e-14)
    assert bessel_k(1.5, 2.0) == pytest.approx(math.sqrt(math.pi / 4) * math.exp(-2) * 1.5, rel=1e-14)


def test_against_scipy_on_accuracy_range():
    t = np.geomspace(1e-6, 50, 120)
    for p in (0.0, 0.25, 1.0, 1.5, 2.0, 3.7, 6.0):
        ours = bessel_k(p, t)
        ref = sp.kv(p, t)
        assert np.max(np.abs(ours / ref - 1)) < 1e-10


def test_half_integer_paths_agree():
    t = np.geomspace(1e-6, 50, 200)
    for p in (0.5, 1.5, 2.5, 3.5, 5.5):
        a = bessel_k_half_integer(p, t)
        b = bessel_k_integral(p, t)
        assert np.max(np.abs(a - b) / a) < 1e-10


def test_large_argument_ratio_monotone():
    t = np.linspace(5, 200, 60)
    for p in (0.0, 1.0, 2.5):
        ratio = bessel_k(p, t) / (np.sqrt(np.pi / (2 * t)) * np.exp(-t))
        assert np.all(np.diff(np.abs(ratio - 1)) <= 1e-15)
        assert abs(ratio[-1] - 1) <= (abs(4 * p * p - 1) + 1) / (8 * t[-1])


def test_positive_decreasing_log_convex():
    t = np.geomspace(1e-3, 40, 300)
    for p in (0.0, 0.5, 1.0, 2.0, 4.5):
        k = bessel_k(p, t)
        assert np.all(k > 0)
        assert np.all(np.diff(k) < 0)
        logk = np.log(k)
        # convexity of log K in t on a nonuniform grid: slopes increase
        slopes = np.diff(logk) / np.diff(t)
        assert np.all(np.diff(slopes) > -1e-9 * np.abs(slopes[1:]))


def test_domain_errors():
    with pytest.raises(ValueError):
        bessel_k(1.0, 0.0)
    with pytest.raises(ValueError):
        bessel_k(1.0, -1.0)
    with pytest.raises(ValueError):
        bessel_k(-0.5, 1.0)
    with pytest.raises(OverflowError):
        bessel_k(200.0, 1e-5)
    with pytest.raises(ValueError):
        bessel_k_half_integer(1.0, 1.0)


@pytest.mark.parametrize("p", [0.5, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("t", [0.1, 0.5, 1.0, 2.0, 5.0, 10.0])
def test_recursion_residual_grid(p, t):
    assert bessel_k_recursion_residual(p, t) <= 1e-6


def test_recursion_examples_with_absolute_step():
    assert bessel_k_recursion_residual(0.5, 1.0, step=1e-4) <= 1e-6
    assert bessel_k_recursion_residual(1.0, 2.0, step=1e-4) <= 1e-6


def test_recursion_residual_second_order():
    r1 = bessel_k_recursion_residual(1.0, 2.0, step=1e-2)
    r2 = bessel_k_recursion_residual(1.0, 2.0, step=5e-3)
    assert r2 / r1 == pytest.approx(0.25, rel=0.05)


def test_gamma():
    assert gamma_fn(1.0) == 1.0
    assert gamma_fn(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-14)
    assert gamma_fn(1.5) == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-14)
    x = np.linspace(0.5, 10, 40)
    assert np.allclose([gamma_fn(v) for v in x], sp.gamma(x), rtol=1e-12, atol=0)
    with pytest.raises(ValueError):
        gamma_fn(0.0)
