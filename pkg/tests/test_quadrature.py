import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.quadrature import gauss_jacobi_left01, gauss_legendre01, simplex_rule


def monomial_exact(alpha):
    """int over the unit simplex of prod lam_i^alpha_i (Dirichlet moment)."""
    return math.prod(math.factorial(a) for a in alpha) / math.factorial(sum(alpha) + len(alpha) - 1)


@pytest.mark.parametrize("dim", [1, 2, 3])
@pytest.mark.parametrize("order", [1, 2, 4, 6, 8])
def test_weights_and_points(dim, order):
    rule = simplex_rule(dim, order)
    assert rule.weights.sum() == pytest.approx(1 / math.factorial(dim), rel=1e-14)
    assert np.allclose(rule.points.sum(axis=1), 1.0)
    assert np.all(rule.points >= -1e-14)


@given(st.integers(1, 3), st.integers(1, 8), st.data())
def test_exact_up_to_order(dim, order, data):
    rule = simplex_rule(dim, order)
    total = data.draw(st.integers(0, order))
    parts = data.draw(st.lists(st.integers(0, total), min_size=dim, max_size=dim))
    alpha = [min(p, total) for p in parts]
    alpha.append(max(total - sum(alpha), 0))
    if sum(alpha) > order:
        return
    got = float(rule.weights @ np.prod(rule.points ** np.array(alpha), axis=1))
    assert got == pytest.approx(monomial_exact(alpha), rel=1e-12, abs=1e-15)


@given(st.integers(1, 10), st.floats(0.0, 4.0))
def test_jacobi_left(m, beta):
    x, w = gauss_jacobi_left01(m, beta)
    for k in range(2 * m):
        assert w @ x ** k == pytest.approx(1 / (k + beta + 1), rel=1e-10)


def test_legendre():
    x, w = gauss_legendre01(5)
    assert w @ x ** 9 == pytest.approx(0.1, rel=1e-14)
