import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.expr import ExpressionError, compile_expression

X = np.array([[0.1, 0.2, 0.3], [1.0, -2.0, 0.5]])


def test_scalar_grammar():
    fn, shape = compile_expression("2^3^2 - -x1*x2 + exp(0)*pi/e + sqrt(abs(x3)) + ln(e) + r", 3)
    assert shape == ()
    r = np.linalg.norm(X, axis=1)
    expect = 2 ** 9 + X[:, 0] * X[:, 1] + np.pi / np.e + np.sqrt(np.abs(X[:, 2])) + 1 + r
    assert np.allclose(fn(X), expect)


def test_vector_and_matrix():
    fn, shape = compile_expression(["x1", "2*x2", "1"], 3)
    assert shape == (3,)
    assert np.allclose(fn(X)[:, 1], 2 * X[:, 1])
    fn, shape = compile_expression([["1", "x1"], ["0", "x2"]], 2)
    assert shape == (2, 2)
    assert fn(X[:, :2]).shape == (2, 2, 2)


@pytest.mark.parametrize("src", ["__import__('os')", "x1.real", "x4", "foo(x1)", "x1 ** 2", "[1]", "x1 if 1 else 2",
                                 "lambda: 1", "", "1 +"])
def test_rejected(src):
    with pytest.raises(ExpressionError):
        compile_expression(src, 3)


@given(st.floats(-100, 100), st.floats(-100, 100))
def test_arithmetic_matches_python(a, b):
    fn, _ = compile_expression(f"({a!r}) * x1 + ({b!r}) - x2 / 4", 2)
    P = np.array([[1.5, -2.0]])
    assert fn(P)[0] == pytest.approx(a * 1.5 + b + 0.5, rel=1e-12, abs=1e-12)


def test_constant_broadcasts():
    fn, _ = compile_expression("3", 3)
    assert np.allclose(fn(X), 3.0)
