import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from isolab import Expression, ParseError


@pytest.mark.parametrize("text,value", [
    ("1+2*3", 7.0),
    ("(1+2)*3", 9.0),
    ("-2^2", -4.0),
    ("2^3^2", 512.0),
    ("8/4/2", 1.0),
    ("  2 *  x ", 3.0),
    ("exp(0)+log(1)+sqrt(4)+sin(0)+cos(0)", 4.0),
    ("1.5e1 - .5", 14.5),
    ("--x", 1.5),
])
def test_precedence_and_literals(text, value):
    assert Expression(text)(np.array([1.5, 0.0])) == pytest.approx(value)


def test_vectorized_over_points():
    e = Expression("x*y + z", dimension=3)
    pts = np.array([[1.0, 2.0, 3.0], [0.5, 0.5, 0.0]])
    assert e(pts).tolist() == [5.0, 0.25]


@pytest.mark.parametrize("text,offset,expected", [
    ("sin(x", 5, "')'"),
    ("1+", 2, "number, variable, function or '('"),
    ("x $ y", 2, "token"),
    ("(x))", 3, "operator or end of input"),
])
def test_parse_errors_report_position(text, offset, expected):
    with pytest.raises(ParseError) as info:
        Expression(text)
    assert info.value.position == offset
    assert info.value.expected == expected
    assert info.value.caret().splitlines()[1] == " " * offset + "^"


def test_unknown_names_rejected():
    with pytest.raises(ParseError):
        Expression("tan(x)")
    with pytest.raises(ParseError):
        Expression("z", dimension=2)


small = st.integers(min_value=-9, max_value=9)


@given(small, small, small, st.sampled_from("+-*"), st.sampled_from("+-*"))
def test_matches_python_arithmetic(a, b, c, op1, op2):
    text = f"{a}{op1}({b}){op2}{c}"
    assert Expression(text)(np.zeros(2)) == pytest.approx(eval(text.replace("^", "**")))


@given(st.floats(-2, 2), st.floats(-2, 2))
def test_function_values(x, y):
    e = Expression("exp(-x^2-2*y^2)*cos(x)")
    assert e(np.array([x, y])) == pytest.approx(math.exp(-x * x - 2 * y * y) * math.cos(x))
