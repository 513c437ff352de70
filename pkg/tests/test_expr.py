import numpy as np
import pytest

from cproj_lab.errors import DomainError
from cproj_lab.expr import ScalarField, abs2, parse, shift_variables


def test_parse_and_evaluate():
    f = parse("2*x1^2 - x2/4 + exp(0)")
    assert f(np.array([3.0, 8.0])) == pytest.approx(2 * 9 - 2 + 1)


def test_unary_minus_and_precedence():
    assert parse("-x1^2")(np.array([3.0])) == pytest.approx(-9.0)
    assert parse("2 + 3 * 4")(np.zeros(1)) == pytest.approx(14.0)


@pytest.mark.parametrize("text", ["x1 +", "(x1", "foo(x1)", "x0", "x1 $ 2"])
def test_bad_syntax(text):
    with pytest.raises(ValueError):
        parse(text)


def test_log_domain():
    with pytest.raises(DomainError):
        parse("log(x1)").jet(np.array([-1.0, 0.0]), 1)


def test_variable_beyond_dimension():
    with pytest.raises(DomainError):
        parse("x3").jet(np.zeros(2), 1)


def test_abs2_and_shift():
    f = abs2(1)
    g = shift_variables(f, 2)
    x = np.array([1.0, 2.0, 3.0, 4.0])
    assert f(x) == pytest.approx(5.0)
    assert g(x) == pytest.approx(25.0)
    assert g.variables() == {2, 3}


def test_string_roundtrip():
    f = parse("log(1 + x1*x1 + x2*x2)")
    g = parse(str(f))
    x = np.array([0.3, -0.4])
    assert g(x) == pytest.approx(f(x))


def test_var_is_zero_based():
    assert ScalarField.var(0)(np.array([7.0])) == 7.0
