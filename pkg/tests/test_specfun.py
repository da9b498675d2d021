import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from relpimc.specfun import bessel_k0, bessel_k1, k0_over_k1, log_bessel_k1

from conftest import quad_bessel_k, rel_err

GRID = np.logspace(-4, 2, 31)


@pytest.mark.parametrize("x", GRID)
def test_k0_k1_match_quadrature(x, bessel_oracle):
    assert rel_err(bessel_k0(x), bessel_oracle(0, x)) < 1e-12
    assert rel_err(bessel_k1(x), bessel_oracle(1, x)) < 1e-12


@pytest.mark.parametrize("x", [1.0, 2.0, 10.0])
def test_reference_points(x, bessel_oracle):
    assert rel_err(bessel_k0(x), bessel_oracle(0, x)) < 1e-12
    assert rel_err(bessel_k1(x), bessel_oracle(1, x)) < 1e-12


def test_quoted_values():
    assert bessel_k0(1.0) == pytest.approx(0.421024438, abs=1e-9)
    assert bessel_k1(1.0) == pytest.approx(0.601907230, abs=1e-9)
    assert k0_over_k1(1.0) == pytest.approx(0.699483, abs=1e-6)
    assert log_bessel_k1(1.0) == pytest.approx(math.log(0.601907230197), abs=1e-10)


@pytest.mark.parametrize("x", [0.5, 1.0, 2.0, 5.0, 10.0])
def test_recurrence_against_quadrature_k2(x):
    k2 = quad_bessel_k(2, x)
    assert rel_err(bessel_k0(x) + 2.0 / x * bessel_k1(x), k2) < 1e-10


def test_small_argument_limits():
    assert bessel_k0(1e-6) > 13.0
    x = 1e-6
    assert bessel_k0(x) == pytest.approx(-math.log(x / 2) - 0.5772156649015329, rel=1e-9)
    assert abs(x * bessel_k1(x) - 1.0) < 1e-6


def test_large_argument_log_k1():
    x = 1000.0
    lead = -x + 0.5 * math.log(math.pi / (2 * x))
    # K1 ~ sqrt(pi/2x) e^-x (1 + 3/(8x) - 15/(128x^2))
    corr = math.log1p(3 / (8 * x) - 15 / (128 * x * x))
    assert log_bessel_k1(x) == pytest.approx(lead + corr, abs=1e-9)
    assert math.isfinite(log_bessel_k1(1e6))
    assert log_bessel_k1(1e6) == pytest.approx(-1e6 + 0.5 * math.log(math.pi / 2e6), abs=1e-6)


def test_log_consistency():
    assert math.exp(log_bessel_k1(5.0)) == pytest.approx(bessel_k1(5.0), rel=1e-12)
    for x in np.logspace(-4, 2.5, 40):
        assert log_bessel_k1(x) == pytest.approx(math.log(bessel_k1(x)), abs=1e-10)


def test_ratio_asymptotics_and_monotonicity():
    assert abs(k0_over_k1(1e4) - (1 - 5e-5)) < 1e-8
    xs = np.logspace(-1, 2, 200)
    r = np.array([k0_over_k1(x) for x in xs])
    assert np.all(np.diff(r) > 0)
    assert k0_over_k1(700.0) < 1.0
    assert k0_over_k1(1e6) < 1.0


def test_ratio_matches_quotient():
    for x in np.logspace(-4, 2.5, 40):
        assert k0_over_k1(x) == pytest.approx(bessel_k0(x) / bessel_k1(x), rel=1e-13)


@pytest.mark.parametrize("bad", [0.0, -1.0, math.inf, math.nan])
def test_domain_errors(bad):
    for f in (bessel_k0, bessel_k1, log_bessel_k1, k0_over_k1):
        with pytest.raises(ValueError):
            f(bad)


@given(st.floats(1e-6, 700.0))
def test_positive_and_ratio_in_unit_interval(x):
    assert bessel_k0(x) > 0 and bessel_k1(x) > 0
    assert 0.0 < k0_over_k1(x) < 1.0
    assert bessel_k1(x) > bessel_k0(x)


@given(st.floats(1e-6, 600.0), st.floats(1.0001, 1.5))
def test_strictly_decreasing(x, factor):
    assert bessel_k0(x * factor) < bessel_k0(x)
    assert bessel_k1(x * factor) < bessel_k1(x)
