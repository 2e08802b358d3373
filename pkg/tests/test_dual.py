import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, strategies as st

from hyperheat import dual as ad

finite = st.floats(min_value=-30, max_value=30, allow_nan=False)
positive = st.floats(min_value=1e-6, max_value=50)


def test_product_rule_and_quotient():
    f = lambda x: x * x * x / (1 + x)
    v, d = ad.value_and_derivative(f, 2.0)
    assert v == pytest.approx(8 / 3)
    assert d == pytest.approx((3 * 4 * 3 - 8) / 9)


def test_nested_derivative_is_second_derivative():
    d2 = ad.derivative(lambda x: ad.derivative(lambda y: ad.sinh(y) * y, x), 1.3)
    assert d2 == pytest.approx(2 * math.cosh(1.3) + 1.3 * math.sinh(1.3), rel=1e-13)


def test_no_perturbation_confusion():
    # d/dx [x * d/dy (x + y)] = d/dx [x] = 1 at any x; the classic confused answer is 2
    out = ad.derivative(lambda x: x * ad.derivative(lambda y: x + y, 1.0), 3.0)
    assert out == pytest.approx(1.0)
    # d/dx [x * d/dy (x * y)] = 2x
    assert ad.derivative(lambda x: x * ad.derivative(lambda y: x * y, 2.0), 3.0) == pytest.approx(6.0)


def test_arrays_are_differentiated_elementwise():
    x = np.linspace(0.1, 3, 7)
    v, d = ad.value_and_derivative(lambda s: ad.exp(s) * ad.log(s), x)
    np.testing.assert_allclose(d, np.exp(x) * np.log(x) + np.exp(x) / x, rtol=1e-13)


@given(finite)
def test_log_sinh_matches_direct_where_safe(x):
    x = abs(x) + 1e-3
    assert float(ad.log_sinh(x)) == pytest.approx(math.log(math.sinh(x)), rel=1e-12, abs=1e-14)


@given(positive)
def test_log_x_over_sinh_derivative_against_central_difference(x):
    h = 1e-5 * max(1.0, x)
    num = (float(ad.log_x_over_sinh(x + h)) - float(ad.log_x_over_sinh(x - h))) / (2 * h)
    exact = ad.derivative(ad.log_x_over_sinh, x)
    assert exact == pytest.approx(num, rel=1e-6, abs=1e-8)


@pytest.mark.parametrize("x", [1e-8, 1e-3, 0.5, 0.999, 1.001, 2.0])
def test_series_branches_join_smoothly(x):
    with mp.workdps(40):
        want_log = float(mp.log(x / mp.sinh(x)))
        want_coth = float(mp.coth(x) - 1 / mp.mpf(x))
    assert float(ad.log_x_over_sinh(x)) == pytest.approx(want_log, rel=1e-13)
    assert float(ad.coth_minus_inv(x)) == pytest.approx(want_coth, rel=1e-12)


def test_where_selects_branch_and_tangent():
    f = lambda x: ad.where(ad.primal(x) > 0, x * x, -x)
    assert ad.derivative(f, 2.0) == pytest.approx(4.0)
    assert ad.derivative(f, -2.0) == pytest.approx(-1.0)


def test_coth_minus_inv_large_argument_is_finite():
    assert float(ad.coth_minus_inv(800.0)) == pytest.approx(1 - 1 / 800.0)
