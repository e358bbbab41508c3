import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neumannlab.fe import FeFunction, P0Field, interpolate, mass_lumped
from neumannlab.mesh import unit_cube
from neumannlab.splitting import SplitError, split_mean_zero, split_plain, threshold_k, verify_split

MESH = unit_cube(3, 4)


def _u(seed):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=4)
    return interpolate(MESH, lambda X: a[0] * np.sin(2 * X[:, 0] + a[1]) + a[2] * X[:, 1] * X[:, 2] + a[3])


@settings(max_examples=8)
@given(st.integers(0, 10_000), st.floats(0.15, 0.6), st.sampled_from(["positive", "both"]))
def test_plain_split_properties(seed, eps, side):
    u = _u(seed)
    res = split_plain(u, 1.0, eps, side)
    rep = verify_split(res, samples=200, seed=seed)
    assert rep.worst <= 1e-12
    assert rep.budget_error <= 1e-10 and rep.disjointness <= 1e-12
    assert rep.bound_ok


@settings(max_examples=4)
@given(st.integers(0, 10_000), st.floats(0.3, 0.6))
def test_mean_zero_split(seed, eps):
    u = _u(seed)
    # the P1 mean is the lumped-mass average
    u = FeFunction(MESH, u.values - (mass_lumped(MESH) @ u.values) / MESH.volume)
    res = split_mean_zero(u, 1.0, eps)
    rep = verify_split(res, samples=200, seed=seed)
    assert rep.worst <= 1e-12 and rep.budget_error <= 1e-10
    assert max(abs(m) for m in rep.piece_means) <= 1e-10


def test_piece_count_matches_weight():
    # |h|^n integrates to 1 on the active set: N = ceil(1 / eps^3)
    u = interpolate(MESH, lambda X: X[:, 0])
    res = split_plain(u, 1.0, 0.5)
    assert res.N == 8 and res.bound == pytest.approx(9.0)
    assert np.allclose(res.levels, np.linspace(1, 0, 9), atol=1e-12)


def test_threshold_balances_moments():
    u = interpolate(MESH, lambda X: X[:, 0] - 0.5)
    k = threshold_k(u, 0.25)
    assert k == pytest.approx(-0.25, abs=1e-12)


def test_h_zero_gives_one_piece():
    res = split_plain(_u(1), P0Field(MESH, np.zeros(MESH.n_cells)), 0.3)
    assert res.N == 1


def test_rejects():
    with pytest.raises(SplitError):
        split_plain(_u(0), 1.0, 0.0)
    with pytest.raises(SplitError):
        split_mean_zero(interpolate(MESH, 1.0), 1.0, 0.3)
