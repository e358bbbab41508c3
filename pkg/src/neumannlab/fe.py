"""Degree-1 finite element functions, coefficient fields, integration and norms.

A :class:`FeFunction` holds one value per vertex.  A :class:`P0Field` holds one
value (scalar or vector) per cell.  A :class:`CoefficientField` describes a
coefficient or datum of the operator and can be sampled at quadrature points
on cells or boundary facets.

``lp_norm`` of a P1 function is computed exactly per cell: for affine ``u`` on
a k-simplex ``T`` the Hermite--Genocchi formula gives
``int_T g(u) = k! |T| G[v_0, ..., v_k]`` with ``G^{(k)} = g`` and ``G[...]``
the divided difference of the vertex values.  This path shares no code with
the level-set slicing in :mod:`neumannlab.levelset`, so comparing the two is a
genuine cross-check.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import mpmath
import numpy as np
from scipy.spatial import cKDTree

from .mesh import SimplicialMesh
from .quadrature import QuadratureRule, simplex_rule

ROLES = ("A", "b", "c", "d", "f", "F", "g", "h")
DEFAULT_ORDER = 4


class OutsideDomainError(ValueError):
    """A point does not lie in any cell of the mesh."""


# ----------------------------------------------------------------------
# Fields
# ----------------------------------------------------------------------
@dataclass(frozen=True, eq=False)
class FeFunction:
    """Continuous piecewise-linear function given by its nodal values."""

    mesh: SimplicialMesh
    values: np.ndarray
    name: str = "u"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.mesh.n_vertices,):
            raise ValueError(f"expected {self.mesh.n_vertices} nodal values, got shape {vals.shape}")
        object.__setattr__(self, "values", vals)

    def cell_values(self) -> np.ndarray:
        return self.values[self.mesh.cells]

    def gradients(self) -> np.ndarray:
        """Cellwise-constant gradient, shape (nc, n)."""
        return np.einsum("ci,cik->ck", self.cell_values(), self.mesh.barycentric_gradients)

    def gradient(self, cell: int) -> np.ndarray:
        return self.cell_values()[cell] @ self.mesh.barycentric_gradients[cell]

    def evaluate(self, points) -> np.ndarray | float:
        pts = np.atleast_2d(np.asarray(points, dtype=float))
        cells, lam = locate(self.mesh, pts)
        out = np.einsum("pi,pi->p", lam, self.values[self.mesh.cells[cells]])
        return float(out[0]) if np.ndim(points) == 1 else out

    def at_quadrature(self, rule: QuadratureRule) -> np.ndarray:
        return self.cell_values() @ rule.points.T

    def __add__(self, other):
        return FeFunction(self.mesh, self.values + _vals(other), self.name)

    def __sub__(self, other):
        return FeFunction(self.mesh, self.values - _vals(other), self.name)

    def __mul__(self, a: float):
        return FeFunction(self.mesh, self.values * a, self.name)

    __rmul__ = __mul__

    def __neg__(self):
        return FeFunction(self.mesh, -self.values, self.name)

    def positive_part_nodal(self) -> "FeFunction":
        return FeFunction(self.mesh, np.maximum(self.values, 0.0), self.name + "+")

    def to_dict(self) -> dict:
        return {"field": self.name, "values": self.values.tolist()}


def _vals(other):
    return other.values if isinstance(other, FeFunction) else other


@dataclass(frozen=True, eq=False)
class P0Field:
    """Piecewise-constant field: one scalar or vector per cell."""

    mesh: SimplicialMesh
    values: np.ndarray
    name: str = "h"

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape[0] != self.mesh.n_cells:
            raise ValueError(f"expected {self.mesh.n_cells} cell values, got {vals.shape[0]}")
        object.__setattr__(self, "values", vals)

    def magnitude(self) -> np.ndarray:
        v = self.values
        return np.abs(v) if v.ndim == 1 else np.linalg.norm(v.reshape(len(v), -1), axis=1)


@dataclass(frozen=True, eq=False)
class TraceFunction:
    """Boundary restriction of a P1 function on a set of boundary facets."""

    mesh: SimplicialMesh
    facets: np.ndarray
    values: np.ndarray  # nodal values on all vertices; only facet vertices matter
    name: str = "trace"

    def facet_values(self) -> np.ndarray:
        return self.values[self.mesh.boundary_facets[self.facets]]

    def facet_weights(self) -> np.ndarray:
        return self.mesh.facet_areas[self.facets]


@dataclass(frozen=True, eq=False)
class CoefficientField:
    """Coefficient or datum of the operator.

    ``kind`` is ``"constant"``, ``"cell"`` (one value per cell),
    ``"facet"`` (one value per boundary facet) or ``"analytic"`` (callable
    on ``(m, n)`` point arrays returning ``(m, *shape)``).
    """

    kind: str
    value: object
    shape: tuple = ()
    role: str | None = None
    bounds: tuple | None = None  # (lambda, Lambda) for role A

    def __post_init__(self):
        if self.kind not in ("constant", "cell", "facet", "analytic"):
            raise ValueError(f"unknown coefficient kind {self.kind!r}")
        if self.role is not None and self.role not in ROLES:
            raise ValueError(f"unknown role {self.role!r}")
        if self.kind != "analytic":
            object.__setattr__(self, "value", np.asarray(self.value, dtype=float))

    # constructors ------------------------------------------------------
    @classmethod
    def constant(cls, value, role=None, **kw):
        v = np.asarray(value, dtype=float)
        return cls("constant", v, v.shape, role, **kw)

    @classmethod
    def per_cell(cls, values, role=None, **kw):
        v = np.asarray(values, dtype=float)
        return cls("cell", v, v.shape[1:], role, **kw)

    @classmethod
    def per_facet(cls, values, role=None, **kw):
        v = np.asarray(values, dtype=float)
        return cls("facet", v, v.shape[1:], role, **kw)

    @classmethod
    def analytic(cls, fn: Callable, shape=(), role=None, **kw):
        return cls("analytic", fn, tuple(shape), role, **kw)

    @property
    def is_zero(self) -> bool:
        return self.kind in ("constant", "cell", "facet") and not np.any(self.value)

    # sampling ----------------------------------------------------------
    def _sample(self, points: np.ndarray, index: np.ndarray | None, nq: int) -> np.ndarray:
        m = points.shape[0]
        if self.kind == "constant":
            return np.broadcast_to(self.value, (m, nq) + self.shape)
        if self.kind in ("cell", "facet"):
            vals = self.value if index is None else self.value[index]
            return np.broadcast_to(vals[:, None], (m, nq) + self.shape)
        flat = points.reshape(-1, points.shape[-1])
        out = np.asarray(self.value(flat), dtype=float)
        return out.reshape((m, nq) + self.shape)

    def at_cells(self, mesh: SimplicialMesh, rule: QuadratureRule, cells=None) -> np.ndarray:
        if self.kind == "facet":
            raise ValueError("facet field sampled on cells")
        idx = np.arange(mesh.n_cells) if cells is None else np.asarray(cells)
        X = mesh.vertices[mesh.cells[idx]]
        pts = np.matmul(rule.points, X)
        return self._sample(pts, idx if self.kind == "cell" else None, rule.size)

    def at_facets(self, mesh: SimplicialMesh, rule: QuadratureRule, facets=None) -> np.ndarray:
        if self.kind == "cell":
            owner = mesh.facet_owner if facets is None else mesh.facet_owner[facets]
            nq = rule.size
            return np.broadcast_to(self.value[owner][:, None], (len(owner), nq) + self.shape)
        idx = np.arange(len(mesh.boundary_facets)) if facets is None else np.asarray(facets)
        X = mesh.vertices[mesh.boundary_facets[idx]]
        pts = np.matmul(rule.points, X)
        return self._sample(pts, idx if self.kind == "facet" else None, rule.size)

    def cell_average(self, mesh: SimplicialMesh, order: int = DEFAULT_ORDER) -> np.ndarray:
        if self.kind == "cell":
            return self.value
        if self.kind == "constant":
            return np.broadcast_to(self.value, (mesh.n_cells,) + self.shape).copy()
        rule = simplex_rule(mesh.n, order)
        vals = self.at_cells(mesh, rule)
        return np.tensordot(rule.weights, vals, axes=([0], [1])) * math.factorial(mesh.n)


def as_field(x, role=None, shape=()) -> CoefficientField | None:
    """Coerce constants, callables and fields to :class:`CoefficientField`."""
    if x is None or isinstance(x, CoefficientField):
        return x
    if isinstance(x, P0Field):
        return CoefficientField.per_cell(x.values, role)
    if callable(x):
        return CoefficientField.analytic(x, shape, role)
    return CoefficientField.constant(x, role)


def check_ellipticity(A: CoefficientField, mesh: SimplicialMesh, bounds=None,
                      order: int = DEFAULT_ORDER) -> dict:
    """Sample ``lambda |xi|^2 <= A xi.xi`` and ``|A| <= Lambda`` at quadrature points."""
    bounds = bounds or A.bounds
    if A.kind == "constant":
        vals = np.asarray(A.value).reshape(1, mesh.n, mesh.n)
    elif A.kind == "cell":
        vals = np.asarray(A.value).reshape(-1, mesh.n, mesh.n)
    else:
        rule = simplex_rule(mesh.n, order)
        vals = np.asarray(A.at_cells(mesh, rule)).reshape(-1, mesh.n, mesh.n)
    sym = 0.5 * (vals + np.transpose(vals, (0, 2, 1)))
    lam_min = float(np.min(np.linalg.eigvalsh(sym)))
    # spectral norm from the largest eigenvalue of A^T A
    norm_max = float(np.sqrt(np.max(np.linalg.eigvalsh(np.matmul(np.transpose(vals, (0, 2, 1)), vals)))))
    ok = lam_min > 0
    if bounds is not None:
        lam, Lam = bounds
        ok = ok and lam_min >= lam * (1 - 1e-12) and norm_max <= Lam * (1 + 1e-12)
    return {"min_eigenvalue": lam_min, "max_norm": norm_max, "ok": bool(ok)}


# ----------------------------------------------------------------------
# Construction and point location
# ----------------------------------------------------------------------
def interpolate(mesh: SimplicialMesh, callback, name: str = "u") -> FeFunction:
    """Nodal interpolant of ``callback`` (called on the ``(nv, n)`` vertex array)."""
    if np.isscalar(callback):
        vals = np.full(mesh.n_vertices, float(callback))
    else:
        vals = np.asarray(callback(mesh.vertices), dtype=float).reshape(-1)
        if vals.shape != (mesh.n_vertices,):
            raise ValueError("callback must return one value per vertex")
    bad = np.nonzero(~np.isfinite(vals))[0]
    if len(bad):
        raise ValueError(f"non-finite interpolation value at vertex {int(bad[0])}")
    return FeFunction(mesh, vals, name)


def _tree(mesh: SimplicialMesh):
    tree = mesh.__dict__.get("_centroid_tree")
    if tree is None:
        tree = cKDTree(mesh.centroids)
        mesh.__dict__["_centroid_tree"] = tree
    return tree


def barycentric(mesh: SimplicialMesh, cells: np.ndarray, points: np.ndarray) -> np.ndarray:
    X0 = mesh.vertices[mesh.cells[cells, 0]]
    G = mesh.barycentric_gradients[cells]
    lam = np.einsum("pik,pk->pi", G, points - X0)
    lam[:, 0] += 1.0
    return lam


def locate(mesh: SimplicialMesh, points: np.ndarray, tol: float = 1e-12):
    """Containing cell and barycentric coordinates for each point."""
    points = np.atleast_2d(points)
    k = min(mesh.n_cells, 24)
    _, cand = _tree(mesh).query(points, k=k)
    cand = cand.reshape(len(points), k)
    cells = np.full(len(points), -1)
    lams = np.zeros((len(points), mesh.n + 1))
    for j in range(k):
        todo = np.nonzero(cells < 0)[0]
        if not len(todo):
            break
        c = cand[todo, j]
        lam = barycentric(mesh, c, points[todo])
        hit = lam.min(axis=1) >= -tol
        cells[todo[hit]] = c[hit]
        lams[todo[hit]] = lam[hit]
    for p in np.nonzero(cells < 0)[0]:
        allc = np.arange(mesh.n_cells)
        lam = barycentric(mesh, allc, np.broadcast_to(points[p], (mesh.n_cells, mesh.n)))
        best = int(np.argmax(lam.min(axis=1)))
        if lam[best].min() < -1e-9:
            raise OutsideDomainError(f"point {points[p].tolist()} lies outside the mesh")
        cells[p], lams[p] = best, lam[best]
    return cells, lams


# ----------------------------------------------------------------------
# Integration
# ----------------------------------------------------------------------
def _region(mesh: SimplicialMesh, region):
    """Return ('cells'|'facets', index array)."""
    if region is None or (isinstance(region, str) and region in ("all", "domain")):
        return "cells", np.arange(mesh.n_cells)
    if isinstance(region, str):
        return "facets", mesh.facets_tagged(region)
    if isinstance(region, tuple) and region[0] in ("cells", "facets"):
        return region[0], np.asarray(region[1], dtype=np.int64)
    return "cells", np.asarray(region, dtype=np.int64)


def _values_at(integrand, mesh, rule, kind, idx):
    """Integrand sampled at quadrature points, shape (m, nq, ...)."""
    if kind == "cells":
        simp = mesh.cells[idx]
    else:
        simp = mesh.boundary_facets[idx]
    if isinstance(integrand, FeFunction):
        return integrand.values[simp] @ rule.points.T
    if isinstance(integrand, TraceFunction):
        return integrand.values[simp] @ rule.points.T
    if isinstance(integrand, P0Field):
        own = idx if kind == "cells" else mesh.facet_owner[idx]
        v = integrand.values[own]
        return np.broadcast_to(v[:, None], (len(idx), rule.size) + v.shape[1:])
    if isinstance(integrand, CoefficientField):
        if kind == "cells":
            return integrand.at_cells(mesh, rule, idx)
        return integrand.at_facets(mesh, rule, idx)
    if callable(integrand):
        X = mesh.vertices[simp]
        pts = np.matmul(rule.points, X)
        out = np.asarray(integrand(pts.reshape(-1, mesh.n)), dtype=float)
        return out.reshape((len(idx), rule.size) + out.shape[1:])
    return np.full((len(idx), rule.size), float(integrand))


def cell_integrals(mesh: SimplicialMesh, integrand, order: int = DEFAULT_ORDER,
                   region="all") -> np.ndarray:
    """Per-cell (or per-facet) integrals."""
    kind, idx = _region(mesh, region)
    dim = mesh.n if kind == "cells" else mesh.n - 1
    rule = simplex_rule(dim, order)
    vals = _values_at(integrand, mesh, rule, kind, idx)
    meas = mesh.volumes[idx] if kind == "cells" else mesh.facet_areas[idx]
    return np.tensordot(vals, rule.weights, axes=([1], [0])) * (meas * math.factorial(dim)).reshape(
        (-1,) + (1,) * (vals.ndim - 2))


def integrate(mesh: SimplicialMesh, integrand, rule: QuadratureRule | int | None = None,
              region="all"):
    """Integral over the domain, a cell subset, or a boundary subset.

    ``region`` is ``"all"``, an array of cell indices, ``"boundary"``, a
    boundary tag, or ``("facets", indices)``.
    """
    order = rule.order if isinstance(rule, QuadratureRule) else (rule or DEFAULT_ORDER)
    per = cell_integrals(mesh, integrand, order, region)
    out = per.sum(axis=0)
    return float(out) if np.ndim(out) == 0 else out


# ----------------------------------------------------------------------
# Lp norms
# ----------------------------------------------------------------------
def _antiderivative(x, p, k, positive=False):
    """k-fold antiderivative of |x|^p (or x_+^p) vanishing to high order at 0."""
    if positive:
        return np.maximum(x, 0.0) ** (p + k) / math.prod(p + j for j in range(1, k + 1))
    return x ** k * np.abs(x) ** p / math.prod(p + j for j in range(1, k + 1))


def _dd_float(v: np.ndarray, p: float, positive=False) -> np.ndarray:
    k = v.shape[1] - 1
    G = _antiderivative(v, p, k, positive)
    total = np.zeros(len(v))
    for i in range(k + 1):
        den = np.ones(len(v))
        for j in range(k + 1):
            if j != i:
                den = den * (v[:, i] - v[:, j])
        total += G[:, i] / den
    return total


def _dd_mp(v: np.ndarray, p: float, positive=False) -> float:
    k = len(v) - 1
    with mpmath.workdps(110):
        vs = sorted(mpmath.mpf(float(x)) for x in v)
        scale = max(abs(x) for x in vs)
        delta = scale * mpmath.mpf(10) ** -25
        for i in range(1, k + 1):
            if vs[i] - vs[i - 1] < delta:
                vs[i] = vs[i - 1] + delta
        P = mpmath.mpf(p)
        norm = mpmath.fprod(P + j for j in range(1, k + 1))
        total = mpmath.mpf(0)
        for i in range(k + 1):
            den = mpmath.fprod(vs[i] - vs[j] for j in range(k + 1) if j != i)
            if positive:
                total += max(vs[i], 0) ** (P + k) / norm / den
            else:
                total += vs[i] ** k * abs(vs[i]) ** P / norm / den
        return float(total)


def power_integrals(values: np.ndarray, measures: np.ndarray, p: float,
                    positive: bool = False) -> np.ndarray:
    """``int_T |u|^p`` for affine ``u`` on each simplex, exactly.

    ``values`` has shape (m, k+1) (vertex values), ``measures`` the simplex
    measures.  With ``positive=True`` the integrand is ``(u+)^p``.
    """
    v = np.asarray(values, dtype=float)
    if not positive:
        return _power_integrals(v, p) * measures
    out = np.zeros(len(v))
    lo, hi = v.min(axis=1), v.max(axis=1)
    whole = lo >= 0
    out[whole] = _power_integrals(v[whole], p)
    cut = (lo < 0) & (hi > 0)
    if np.any(cut):
        sv = np.sort(v[cut], axis=1)
        k = v.shape[1] - 1
        good = np.min(np.diff(sv, axis=1), axis=1) >= 0.05 * np.abs(sv).max(axis=1)
        res = np.empty(len(sv))
        res[good] = _dd_float(sv[good], p, True) * math.factorial(k)
        for i in np.nonzero(~good)[0]:
            res[i] = _dd_mp(sv[i], p, True) * math.factorial(k)
        out[cut] = res
    return out * measures


def _power_integrals(v: np.ndarray, p: float) -> np.ndarray:
    k = v.shape[1] - 1
    out = np.empty(len(v))
    lo, hi = v.min(axis=1), v.max(axis=1)
    scale = np.maximum(np.abs(lo), np.abs(hi))
    const = hi - lo <= 1e-14 * scale
    out[const] = np.abs(v[const, 0]) ** p
    rest = ~const
    crosses = (lo < 0) & (hi > 0)
    integer_p = float(p).is_integer()
    exact_poly = rest & integer_p & (~crosses | (int(p) % 2 == 0))
    if np.any(exact_poly):
        rule = simplex_rule(k, int(p))
        uq = v[exact_poly] @ rule.points.T
        out[exact_poly] = (np.abs(uq) ** p) @ rule.weights * math.factorial(k)
    todo = rest & ~exact_poly
    if np.any(todo):
        sv = np.sort(v[todo], axis=1)
        gap = np.min(np.diff(sv, axis=1), axis=1)
        good = gap >= 0.05 * scale[todo]
        res = np.empty(len(sv))
        res[good] = _dd_float(sv[good], p) * math.factorial(k)
        far = ~good & ((sv[:, 0] > 0) | (sv[:, -1] < 0)) & (
            np.minimum(np.abs(sv[:, 0]), np.abs(sv[:, -1])) >= (sv[:, -1] - sv[:, 0]))
        if np.any(far):
            rule = simplex_rule(k, 24)
            uq = sv[far] @ rule.points.T
            res[far] = (np.abs(uq) ** p) @ rule.weights * math.factorial(k)
        for i in np.nonzero(~good & ~far)[0]:
            res[i] = _dd_mp(sv[i], p) * math.factorial(k)
        out[todo] = res
    return out


def lp_norm(f, p: float, region="all", order: int | None = None, positive: bool = False) -> float:
    """``(int |f|^p)^{1/p}`` over the domain or a boundary subset.

    P1 and trace functions are integrated exactly cell by cell; P0 fields
    exactly; coefficient fields and callables by quadrature of order
    ``max(4, ceil(p) + 1)``.  ``positive=True`` gives the norm of ``f+``
    (P1 and trace functions only).
    """
    if not p >= 1:
        raise ValueError(f"lp_norm needs p >= 1 (got {p}); use lorentz_norm for quasi-norms")
    if isinstance(f, TraceFunction):
        return float(power_integrals(f.facet_values(), f.facet_weights(), p, positive).sum() ** (1 / p))
    if isinstance(f, FeFunction):
        mesh = f.mesh
        kind, idx = _region(mesh, region)
        if kind == "cells":
            vals, meas = f.values[mesh.cells[idx]], mesh.volumes[idx]
        else:
            vals, meas = f.values[mesh.boundary_facets[idx]], mesh.facet_areas[idx]
        return float(power_integrals(vals, meas, p, positive).sum() ** (1 / p))
    if positive:
        raise TypeError("positive part norms are defined for P1 and trace functions")
    if isinstance(f, P0Field):
        mesh = f.mesh
        kind, idx = _region(mesh, region)
        mag = f.magnitude()
        if kind == "cells":
            return float(np.sum(mag[idx] ** p * mesh.volumes[idx]) ** (1 / p))
        return float(np.sum(mag[mesh.facet_owner[idx]] ** p * mesh.facet_areas[idx]) ** (1 / p))
    raise TypeError("lp_norm on a CoefficientField needs a mesh; use field_lp_norm")


def field_lp_norm(mesh: SimplicialMesh, f, p: float, region="all", order: int | None = None) -> float:
    """Lp norm of a coefficient field (Euclidean/Frobenius magnitude pointwise)."""
    if not p >= 1:
        raise ValueError(f"lp_norm needs p >= 1 (got {p})")
    if isinstance(f, (FeFunction, P0Field, TraceFunction)):
        return lp_norm(f, p, region)
    order = order or max(DEFAULT_ORDER, math.ceil(p) + 1)
    kind, idx = _region(mesh, region)
    dim = mesh.n if kind == "cells" else mesh.n - 1
    rule = simplex_rule(dim, order)
    vals = np.asarray(_values_at(f, mesh, rule, kind, idx))
    mag = np.abs(vals) if vals.ndim == 2 else np.linalg.norm(vals.reshape(vals.shape[0], vals.shape[1], -1), axis=2)
    meas = mesh.volumes[idx] if kind == "cells" else mesh.facet_areas[idx]
    total = float(np.sum((mag ** p @ rule.weights) * meas) * math.factorial(dim))
    return total ** (1 / p)


def gradient_field(u: FeFunction) -> P0Field:
    return P0Field(u.mesh, u.gradients(), name=f"grad {u.name}")


def y_norm(u: FeFunction) -> float:
    """``||u||_{L^{2n/(n-2)}} + ||grad u||_{L^2}``."""
    n = u.mesh.n
    return lp_norm(u, 2 * n / (n - 2)) + lp_norm(gradient_field(u), 2)


def w_norm(u: FeFunction) -> float:
    return lp_norm(u, 2) + lp_norm(gradient_field(u), 2)


def trace_restrict(f: FeFunction, facets="all") -> TraceFunction:
    mesh = f.mesh
    idx = mesh.facets_tagged(facets) if isinstance(facets, str) else np.asarray(facets)
    return TraceFunction(mesh, idx, f.values, name=f"{f.name}|bdry")


def mass_lumped(mesh: SimplicialMesh) -> np.ndarray:
    """``int phi_j`` for every hat function."""
    out = np.zeros(mesh.n_vertices)
    out += np.bincount(mesh.cells.ravel(), np.repeat(mesh.volumes / (mesh.n + 1), mesh.n + 1),
                       minlength=mesh.n_vertices)
    return out


# ----------------------------------------------------------------------
# Reflection
# ----------------------------------------------------------------------
def reflect_function(f: FeFunction, reflected: SimplicialMesh) -> FeFunction:
    """Even extension ``u~ = u`` above the graph, ``u o Psi^{-1}`` below."""
    info = reflected.reflection
    if info is None:
        raise ValueError("mesh was not produced by reflect_mesh")
    if f.mesh.n_vertices != info.n_source_vertices:
        raise ValueError("function does not live on the source of this reflection")
    vals = np.empty(reflected.n_vertices)
    vals[: info.n_source_vertices] = f.values
    extra = np.arange(info.n_source_vertices, reflected.n_vertices)
    vals[extra] = f.values[info.partner[extra]]
    return FeFunction(reflected, vals, f.name + "~")


def reflect_cell_field(values: np.ndarray, reflected: SimplicialMesh, role: str) -> np.ndarray:
    """Extend a P0 coefficient across the graph following its tensor type.

    ``A' = DPsi A DPsi^T``; ``b', c', F' = DPsi b``; scalars are copied.
    """
    info = reflected.reflection
    if info is None:
        raise ValueError("mesh was not produced by reflect_mesh")
    values = np.asarray(values, dtype=float)
    D = info.jacobians
    if role == "A":
        mirrored = np.einsum("cij,cjk,clk->cil", D, values, D)
    elif role in ("b", "c", "F"):
        mirrored = np.einsum("cij,cj->ci", D, values)
    else:
        mirrored = values
    return np.concatenate([values, mirrored])
