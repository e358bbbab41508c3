"""Positive-weight quadrature on the reference simplex.

Rules are conical products of Gauss--Jacobi rules in collapsed (Duffy)
coordinates, so any order is available in any dimension.  Each rule checks
its own exactness on all monomials up to the declared order when built.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi


@dataclass(frozen=True)
class QuadratureRule:
    """Points in barycentric coordinates, weights summing to ``1/dim!``."""

    dim: int
    order: int
    points: np.ndarray  # (nq, dim+1) barycentric
    weights: np.ndarray  # (nq,)

    @property
    def size(self) -> int:
        return len(self.weights)


def _gauss_jacobi01(m: int, alpha: int):
    """Nodes/weights on [0,1] for the weight (1-x)^alpha."""
    x, w = roots_jacobi(m, alpha, 0)
    return (1 + x) / 2, w / 2 ** (alpha + 1)


def _monomial_integral(alpha) -> float:
    """Integral of prod x_i^alpha_i over the reference simplex."""
    num = math.prod(math.factorial(a) for a in alpha)
    return num / math.factorial(sum(alpha) + len(alpha))


@lru_cache(maxsize=None)
def simplex_rule(dim: int, order: int) -> QuadratureRule:
    """Conical-product rule exact for polynomials of degree ``order``."""
    if dim < 0 or order < 0:
        raise ValueError("dimension and order must be non-negative")
    if dim == 0:
        return QuadratureRule(0, order, np.ones((1, 1)), np.ones(1))
    m = max(1, (order + 2) // 2)
    rules = [_gauss_jacobi01(m, dim - 1 - i) for i in range(dim)]
    pts, wts = [], []
    for combo in itertools.product(range(m), repeat=dim):
        xi = [rules[i][0][combo[i]] for i in range(dim)]
        w = math.prod(rules[i][1][combo[i]] for i in range(dim))
        x, rest = [], 1.0
        for v in xi:
            x.append(rest * v)
            rest *= 1 - v
        pts.append([1 - sum(x)] + x)
        wts.append(w)
    points = np.asarray(pts)
    weights = np.asarray(wts)
    _check_exactness(dim, order, points, weights)
    for arr in (points, weights):
        arr.setflags(write=False)
    return QuadratureRule(dim, order, points, weights)


def _check_exactness(dim, order, points, weights):
    x = points[:, 1:]
    for deg in range(order + 1):
        for alpha in itertools.product(range(deg + 1), repeat=dim):
            if sum(alpha) != deg:
                continue
            approx = float(weights @ np.prod(x ** np.asarray(alpha), axis=1))
            exact = _monomial_integral(alpha)
            if abs(approx - exact) > 1e-13 * max(1.0, exact) + 1e-15:
                raise AssertionError(f"rule dim={dim} order={order} fails on x^{alpha}")


@lru_cache(maxsize=None)
def gauss_legendre01(m: int):
    x, w = np.polynomial.legendre.leggauss(m)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def gauss_jacobi_left01(m: int, beta: float):
    """Nodes/weights on [0,1] for the weight x^beta."""
    x, w = roots_jacobi(m, 0.0, beta)
    return (1 + x) / 2, w / 2 ** (beta + 1)
