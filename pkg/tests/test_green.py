import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.assembly import ProblemSpec
from neumannlab.fe import CoefficientField, OutsideDomainError, mass_lumped
from neumannlab.green import (ball_volume, check_green_scaling, check_symmetry, duality_pairing, green_table,
                              mollified_delta, represent_solution)
from neumannlab.mesh import unit_cube

MESH = unit_cube(3, 6)
A = CoefficientField.constant([[1, .3, 0], [-.1, 1, .2], [0, 0, 1.2]])
B = CoefficientField.analytic(lambda X: 0.3 * (X - 0.5), (3,))
SPEC = ProblemSpec(MESH, A=A, b=B, d=1.0)
SOURCES = np.array([[.3, .4, .5], [.6, .5, .4], [.5, .7, .3]])


@given(st.floats(0.15, 0.25), st.floats(0.25, 0.75), st.floats(0.25, 0.75))
def test_mollifier_interior_ball(eps, y1, y2):
    y = np.array([y1, y2, 0.5])
    mol = mollified_delta(MESH, y, eps)
    assert mol.load.sum() == pytest.approx(1.0, rel=1e-14)
    assert mol.load.min() >= 0
    if np.all((y - eps > 0) & (y + eps < 1)):
        assert mol.measure == pytest.approx(ball_volume(3, eps), rel=0.02)


def test_mollifier_outside():
    with pytest.raises(OutsideDomainError):
        mollified_delta(MESH, [1.5, 0.5, 0.5], 0.1)


def test_matched_symmetry_roundoff():
    rep = check_symmetry(SPEC, SOURCES, mode="matched")
    assert rep.relative < 1e-12


def test_green_scaling():
    rep = check_green_scaling(SPEC, 2.0, SOURCES)
    assert rep.relative < 1e-10


def test_columns_integrate_against_d():
    # int d G(., y) = int phi_y = 1 when b and c vanish
    spec = ProblemSpec(MESH, d=2.0)
    t = green_table(spec, SOURCES, norms=False)
    # exact mass matrix row sums coincide with lumped masses for P1
    assert np.allclose(2.0 * mass_lumped(MESH) @ t.values, 1.0, rtol=1e-11)
    assert t.variant == "positive" and np.all(t.residuals < 1e-12)


def test_representation_and_duality():
    f = CoefficientField.analytic(lambda X: np.cos(np.pi * X[:, 0]) + X[:, 1])
    t = green_table(SPEC, SOURCES, norms=False)
    rep = represent_solution(t, f=f)
    assert np.allclose(rep.v_rep, rep.v_mollified, rtol=1e-9)
    lhs, rhs = duality_pairing(t, 0, f)
    assert lhs == pytest.approx(rhs, rel=1e-9)


def test_mean_zero_columns():
    t = green_table(ProblemSpec(MESH), SOURCES[:1], norms=True)
    assert t.variant == "mean_zero"
    assert abs(mass_lumped(MESH) @ t.values[:, 0]) < 1e-12
    assert set(t.norms[0]) == {"G_weak", "gradG_weak", "G_boundary_weak"}
    assert math.isfinite(t.norms[0]["G_weak"])
