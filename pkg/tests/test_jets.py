import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cproj_lab.expr import ScalarField, eval_jet, parse
from cproj_lab.jets import JetPolynomial, jet_space


def test_square_at_three():
    jet = eval_jet("x1^2", np.array([3.0, 0.0, 0.0, 0.0]), 2)
    d = jet.as_dict()
    assert d[(0, 0, 0, 0)] == 9.0
    assert d[(1, 0, 0, 0)] == 6.0
    assert d[(2, 0, 0, 0)] == 1.0
    assert len(d) == 3


def test_constant_has_only_order_zero():
    jet = eval_jet(ScalarField.const(2.5), np.array([0.3, -1.0, 4.0, 2.0]), 4)
    assert jet.as_dict() == {(0, 0, 0, 0): 2.5}


def test_exp_taylor_coefficients():
    jet = eval_jet("exp(x1)", np.zeros(2), 3)
    got = [jet.coefficient((k, 0)) for k in range(4)]
    assert got == pytest.approx([1, 1, 1 / 2, 1 / 6], abs=1e-15)


def test_log_and_reciprocal_series():
    jet = eval_jet("log(1 + x1)", np.zeros(2), 6)
    for k in range(1, 7):
        assert jet.coefficient((k, 0)) == pytest.approx((-1) ** (k + 1) / k, abs=1e-14)
    jet = eval_jet("1 / (1 - x2)", np.zeros(2), 6)
    for k in range(7):
        assert jet.coefficient((0, k)) == pytest.approx(1.0, abs=1e-14)


def test_binomial_expansion():
    jet = eval_jet("(x1 + x2)^3", np.zeros(2), 3)
    for a in range(4):
        assert jet.coefficient((a, 3 - a)) == pytest.approx(math.comb(3, a))


def test_determinant_of_polynomial_matrix():
    space = jet_space(2, 3)
    x = space.variables(np.array([0.2, -0.1]))
    m = np.array([[space.constant(1.0) + x[0], x[1]], [x[1], space.constant(2.0) + x[0]]])
    d = space.det(m)
    # closed form (1+x)(2+x) - y^2 evaluated through the polynomial
    off = np.array([0.05, 0.02])
    p = np.array([0.25, -0.08])
    assert space.evaluate(d, off) == pytest.approx((1 + p[0]) * (2 + p[0]) - p[1] ** 2, abs=1e-14)


@settings(max_examples=30, deadline=None)
@given(st.floats(-0.5, 0.5), st.floats(-0.5, 0.5))
def test_taylor_polynomial_approximates_function(a, b):
    f = parse("exp(x1) * log(2 + x2) / (3 + x1 * x2)")
    base = np.array([a, b])
    jet = eval_jet(f, base, 6)
    h = np.array([1e-2, -1e-2])
    exact = f(base + h)
    assert jet(base + h) == pytest.approx(exact, rel=1e-11)


def test_product_rule_matches_multiplication():
    base = np.array([0.3, 0.7])
    f, g = parse("x1^2 + x2"), parse("exp(x2)")
    fg = eval_jet(f * g, base, 4)
    prod = eval_jet(f, base, 4) * eval_jet(g, base, 4)
    assert np.allclose(fg.coefficients, prod.coefficients, atol=1e-14)


def test_diff_lowers_order():
    jet = eval_jet("x1^3", np.array([1.0, 0.0]), 3)
    d = jet.diff(0)
    assert d.order == 2
    assert d.value() == pytest.approx(3.0)


def test_coefficient_axis_checked():
    with pytest.raises(ValueError):
        JetPolynomial(np.zeros(2), 2, np.zeros(5))
