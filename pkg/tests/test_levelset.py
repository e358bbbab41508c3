import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.levelset import SimplexValues, cell_cdf, sublevel_volume

LAM = np.random.default_rng(7).dirichlet(np.ones(4), 200_000)


def mc_cdf(V, x):
    return float(np.mean(LAM @ np.asarray(V) <= x))


@pytest.mark.parametrize("V", [
    [0, 1, 2, 3.0], [0, 0, 1, 1.0], [0, 1, 1, 1.0], [0, 0, 0, 1.0],
    [-1, -6e-17, 6e-17, 1.0],  # nearly equal knots
    [-0.5, 0.0, 6e-17, 1.0], [0, 1, 1 + 1e-15, 2.0],
])
def test_cdf_against_sampling(V):
    V = np.sort(np.asarray(V, dtype=float))
    for x in np.linspace(V[0], V[-1], 9):
        got = cell_cdf(V[None], np.array([x]))[0]
        assert abs(got - mc_cdf(V, x)) < 5e-3


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_cdf_monotone_bounded(vals):
    V = np.sort(np.asarray(vals))[None]
    xs = np.linspace(V.min() - 1, V.max() + 1, 41)
    F = np.array([cell_cdf(V, np.array([x]))[0] for x in xs])
    assert np.all((F >= 0) & (F <= 1))
    assert np.all(np.diff(F) >= -1e-12)
    assert F[0] == 0 and F[-1] == 1


@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4))
def test_cdf_mean_identity(vals):
    """int_a^b (1 - F) = E[u] - a for u supported in [a, b]."""
    V = np.sort(np.asarray(vals))
    a, b = V[0], V[-1]
    if b - a < 1e-6:
        return
    x = np.linspace(a, b, 4001)
    F = cell_cdf(np.repeat(V[None], len(x), axis=0), x)
    integral = np.trapezoid(1 - F, x)
    assert integral == pytest.approx(V.mean() - a, abs=1e-5 * (b - a) + 1e-12)


def test_tail_matches_brute_force(rng):
    V = rng.normal(size=(300, 4))
    W = rng.uniform(0.5, 1.5, 300)
    S = SimplexValues(V, W)
    xs = np.linspace(-3, 3, 17)
    brute = [np.sum(W * (1 - cell_cdf(S.V, np.full(300, x)))) for x in xs]
    assert np.allclose(S.tail(xs), brute, rtol=1e-12, atol=1e-13)


def test_tail_constant_cells():
    S = SimplexValues(np.array([1.0, 2.0, 2.0]), np.array([1.0, 1.0, 1.0]))
    assert S.tail(np.array([2.0]), strict=True)[0] == 0.0
    assert S.tail(np.array([2.0]), strict=False)[0] == 2.0


def test_sublevel_volume():
    assert sublevel_volume(2.0, [0.0, 1.0], 0.0, 0.25) == pytest.approx(0.5)
    with pytest.raises(ValueError):
        sublevel_volume(1.0, [0.0, 1.0], 1.0, 0.5)
