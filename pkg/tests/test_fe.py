import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.fe import (CoefficientField, FeFunction, P0Field, field_lp_norm, gradient_field, interpolate,
                           lp_norm, mass_lumped, power_integrals, y_norm)
from neumannlab.mesh import unit_cube

CUBE = unit_cube(3, 4)


def test_interpolation_and_gradient():
    u = interpolate(CUBE, lambda X: 2 * X[:, 0] - X[:, 2] + 1)
    assert np.allclose(u.gradients(), [2.0, 0.0, -1.0])
    assert u.evaluate(np.array([0.3, 0.2, 0.1])) == pytest.approx(1.5)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_interpolate_rejects_nan():
    with pytest.raises(ValueError):
        interpolate(CUBE, lambda X: np.log(X[:, 0] - 0.5))


@pytest.mark.parametrize("p", [1.0, 1.5, 2.0, 3.0, 6.0])
def test_linear_lp_exact(p):
    # u = x1 - 1/2: int |u|^p = 2 (1/2)^{p+1} / (p+1)
    u = interpolate(CUBE, lambda X: X[:, 0] - 0.5)
    exact = (2 * 0.5 ** (p + 1) / (p + 1)) ** (1 / p)
    assert lp_norm(u, p) == pytest.approx(exact, rel=1e-13)
    assert lp_norm(u, p, positive=True) == pytest.approx(exact / 2 ** (1 / p), rel=1e-13)


@given(st.floats(1.0, 6.0), st.integers(0, 10_000))
def test_positive_and_negative_parts_add_up(p, seed):
    v = np.random.default_rng(seed).normal(size=CUBE.n_vertices)
    u = FeFunction(CUBE, v)
    whole = lp_norm(u, p) ** p
    split = lp_norm(u, p, positive=True) ** p + lp_norm(FeFunction(CUBE, -v), p, positive=True) ** p
    assert split == pytest.approx(whole, rel=1e-10)


@given(st.integers(0, 10_000))
def test_power_integrals_against_quadrature(seed):
    rng = np.random.default_rng(seed)
    V = rng.normal(size=(1, 4)) + rng.uniform(2, 3)  # one sign: |u|^2 is a polynomial
    got = power_integrals(V, np.array([1.0]), 2.0).sum()
    # E[(lam . V)^2] over the Dirichlet(1,1,1,1) distribution
    m2 = (np.sum(V ** 2) + np.sum(V) ** 2) / 20
    assert got == pytest.approx(m2, rel=1e-12)


def test_mass_lumped_sums_to_volume():
    assert mass_lumped(CUBE).sum() == pytest.approx(1.0, rel=1e-14)


def test_p0_and_coefficient_norms():
    g = gradient_field(interpolate(CUBE, lambda X: 3 * X[:, 1]))
    assert lp_norm(g, 2) == pytest.approx(3.0, rel=1e-13)
    f = CoefficientField.analytic(lambda X: np.cos(np.pi * X[:, 0]))
    assert field_lp_norm(CUBE, f, 2, order=8) == pytest.approx(math.sqrt(0.5), rel=1e-9)
    assert lp_norm(P0Field(CUBE, np.ones(CUBE.n_cells)), 3) == pytest.approx(1.0)


def test_y_norm_of_constant():
    assert y_norm(interpolate(CUBE, 2.0)) == pytest.approx(2.0, rel=1e-13)


def test_lp_rejects_small_p():
    with pytest.raises(ValueError):
        lp_norm(interpolate(CUBE, 1.0), 0.5)
