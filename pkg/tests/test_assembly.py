import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.assembly import (CompatibilityError, ProblemError, ProblemSpec, assemble_forms, check_sign_condition,
                                 data_norm, kernel_analysis, scale_problem, solve_adjoint, solve_neumann,
                                 subsolution_rigidity)
from neumannlab.fe import CoefficientField, interpolate, y_norm
from neumannlab.mesh import unit_cube

MESH = unit_cube(3, 4)
B = CoefficientField.analytic(lambda X: 0.3 * (X - 0.5), (3,))
C = CoefficientField.analytic(lambda X: np.column_stack([X[:, 1], -X[:, 0], 0 * X[:, 2]]), (3,))


def test_column_sums_vanish_without_c_and_d():
    K = assemble_forms(ProblemSpec(MESH, b=B)).K
    assert np.abs(np.asarray(K.sum(axis=0))).max() < 1e-13


def test_row_sums_vanish_without_b_and_d():
    K = assemble_forms(ProblemSpec(MESH, c=C)).K
    assert np.abs(np.asarray(K.sum(axis=1))).max() < 1e-13


def test_adjoint_is_transpose():
    A = CoefficientField.constant([[1, .3, 0], [-.1, 1, .2], [0, 0, 1.2]])
    spec = ProblemSpec(MESH, A=A, b=B, c=C, d=0.7, f=1.0)
    res = solve_adjoint(spec)
    assert res.transpose_error < 1e-14


def test_laplace_kernel_is_constants():
    rep = kernel_analysis(ProblemSpec(MESH), k=4)
    assert rep.dimension == 1 and rep.gap >= 10
    assert rep.uhat_positive
    v = rep.uhat.values
    assert np.ptp(v) < 1e-8 * v.mean()


def test_no_kernel_with_positive_d():
    assert kernel_analysis(ProblemSpec(MESH, d=1.0), k=4).dimension == 0


def test_linear_solution_reproduced():
    # -lap u + u = u for u = x1 + 2 x2 - x3 with Neumann data A grad u . nu
    u = lambda X: X[:, 0] + 2 * X[:, 1] - X[:, 2]  # noqa: E731
    spec = ProblemSpec(MESH, d=1.0, f=CoefficientField.analytic(u), F=CoefficientField.constant([1.0, 2.0, -1.0]))
    sol = solve_neumann(spec).u
    assert np.allclose(sol.values, u(MESH.vertices), atol=1e-12)


def test_mean_zero_branch_and_compatibility():
    f = CoefficientField.analytic(lambda X: np.cos(np.pi * X[:, 0]))
    res = solve_neumann(ProblemSpec(MESH, f=f))
    assert res.branch == "mean_zero" and abs(res.multiplier) < 1e-10
    with pytest.raises(CompatibilityError):
        solve_neumann(ProblemSpec(MESH, f=1.0))


@given(st.floats(0.25, 4.0))
def test_scale_invariant_ratio(r):
    spec = ProblemSpec(unit_cube(3, 3), b=B, d=1.0, f=CoefficientField.analytic(lambda X: 1 + X[:, 0]))
    u = solve_neumann(spec).u
    spec_r = scale_problem(spec, r)
    ur = solve_neumann(spec_r).u
    assert np.allclose(ur.values, u.values, rtol=1e-9, atol=1e-12)
    assert y_norm(ur) / data_norm(spec_r) == pytest.approx(y_norm(u) / data_norm(spec), rel=1e-9)


def test_scale_rejects_bad_factor():
    with pytest.raises(ProblemError):
        scale_problem(ProblemSpec(MESH), 0.0)


def test_sign_condition_outward_drift():
    # int b.grad phi = int (-div b) phi + int b.nu phi; div b = 0.9 sinks interior hats
    bad = check_sign_condition(ProblemSpec(MESH, b=B))
    assert not bad.holds and bad.sum_error < 1e-12
    assert bad.values[bad.worst_vertex] == pytest.approx(-0.9 / 4 ** 3, rel=1e-12)
    good = check_sign_condition(ProblemSpec(MESH, b=B, d=2.0))
    assert good.holds and good.integral_d == pytest.approx(2.0)


def test_rigidity_identity():
    # int f = 0 exactly under quadrature, so residuals of any u sum to zero
    spec = ProblemSpec(MESH, b=B, f=CoefficientField.analytic(lambda X: X[:, 1] - 0.5))
    u = solve_neumann(spec).u
    rep = subsolution_rigidity(spec, u)
    assert rep.consistent and rep.all_zero
    v = interpolate(MESH, lambda X: X[:, 0] ** 2)
    rep = subsolution_rigidity(spec, v)
    assert abs(rep.residual_sum) < 1e-13 and not rep.subsolution


def test_shape_validation():
    with pytest.raises(ProblemError):
        ProblemSpec(MESH, d=np.ones(3))
    with pytest.raises(ProblemError):
        ProblemSpec(MESH, variant="other")
