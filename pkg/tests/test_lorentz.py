import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.fe import FeFunction, P0Field, interpolate, lp_norm
from neumannlab.lorentz import (LorentzSpec, decreasing_rearrangement, lorentz_norm, profile_weak_norm,
                                weak_norm)
from neumannlab.mesh import unit_cube

MESH = unit_cube(3, 4)
HALF = P0Field(MESH, (MESH.centroids[:, 0] < 0.5).astype(float))


@given(st.floats(1.0, 6.0), st.floats(0.5, 8.0))
def test_indicator_closed_form(p, q):
    assert lorentz_norm(HALF, (p, q)) == pytest.approx((p / q) ** (1 / q) * 0.5 ** (1 / p), rel=1e-12)


def test_indicator_weak():
    assert weak_norm(HALF, 3.0).value == pytest.approx(0.5 ** (1 / 3), rel=1e-14)
    assert lorentz_norm(HALF, LorentzSpec(3.0)) == pytest.approx(0.5 ** (1 / 3), rel=1e-14)


@given(st.floats(1.0, 5.0), st.integers(0, 1000))
def test_lpp_equals_lp(p, seed):
    u = FeFunction(MESH, np.random.default_rng(seed).normal(size=MESH.n_vertices))
    assert lorentz_norm(u, (p, p)) == pytest.approx(lp_norm(u, p), rel=1e-9)


def test_linear_function_distribution():
    # |x1 - 1/2| > lam on a set of measure 1 - 2 lam
    u = interpolate(MESH, lambda X: X[:, 0] - 0.5)
    prof = decreasing_rearrangement(u)
    lam = np.linspace(0, 0.5, 11)
    assert np.allclose(prof.distribution(lam), 1 - 2 * lam, atol=1e-13)
    assert np.allclose(prof.fstar(np.array([0.2, 0.6])), [0.4, 0.2], atol=1e-12)
    # sup lam (1 - 2 lam)^{1/p} at lam = p / (2 (p + 1))
    p = 2.0
    lam0 = p / (2 * (p + 1))
    assert weak_norm(u, p).value == pytest.approx(lam0 * (1 - 2 * lam0) ** (1 / p), rel=1e-10)


def test_equimeasurable_p0(rng):
    vals = rng.exponential(size=MESH.n_cells)
    f = P0Field(MESH, vals)
    prof = decreasing_rearrangement(f)
    assert profile_weak_norm(prof, 2.0) == pytest.approx(weak_norm(f, 2.0).value, rel=1e-14)
    perm = P0Field(MESH, vals[rng.permutation(MESH.n_cells)])
    # uniform cell volumes: a permutation preserves every norm
    assert lorentz_norm(perm, (2.0, 1.0)) == pytest.approx(lorentz_norm(f, (2.0, 1.0)), rel=1e-12)


def test_surface_measure():
    one = interpolate(MESH, 1.0)
    assert weak_norm(one, 2.0, measure="surface").value == pytest.approx(math.sqrt(6.0), rel=1e-13)


def test_bad_exponents():
    with pytest.raises(ValueError):
        LorentzSpec(0.0)
    with pytest.raises(ValueError):
        LorentzSpec(2.0, -1.0)
