"""Discrete Neumann Green functions built from mollified point sources.

A column ``G_eps(., y)`` solves the Neumann problem with right-hand side the
normalized indicator ``phi_y^eps = chi_{Omega cap B_eps(y)} / |Omega cap B_eps(y)|``
(or ``phi_y^eps - 1/|Omega|`` in the ``int d = 0`` case, where the operator is
reduced to ``-div(A grad u + (b - c) u)`` and the column is taken mean-zero).
All columns share one factorization.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import (KernelError, ProblemSpec, _pair_vanishes, _sample, _weights, assemble_forms,
                       is_mean_zero_case, scale_problem, solve_neumann)
from .fe import (CoefficientField, FeFunction, OutsideDomainError, TraceFunction, _values_at,
                 gradient_field, locate, mass_lumped)
from .lorentz import weak_norm
from .mesh import SimplicialMesh, build_box_mesh
from .quadrature import simplex_rule

BALL_TOLERANCE = 0.01


# ----------------------------------------------------------------------
# Mollified delta
# ----------------------------------------------------------------------
@lru_cache(maxsize=None)
def _reference_subdivision(n: int, k: int):
    """Barycentric quadrature points/weights on a Kuhn-refined reference simplex.

    The simplex ``1 >= x_1 >= ... >= x_n >= 0`` is a union of ``k^n``
    children of the Kuhn triangulation of the unit cube at resolution ``k``.
    Weights sum to 1 (fractions of the parent volume).
    """
    cube = build_box_mesh([0.0] * n, [1.0] * n, [k] * n)
    cen = cube.centroids
    keep = np.all(np.diff(np.column_stack([np.ones(len(cen)), cen, np.zeros(len(cen))]), axis=1) < 0, axis=1)
    rule = simplex_rule(n, 2)
    X = cube.vertices[cube.cells[keep]]  # (m, n+1, n)
    pts = np.einsum("qi,cik->cqk", rule.points, X).reshape(-1, n)
    w = (cube.volumes[keep][:, None] * rule.weights[None, :] * math.factorial(n)).ravel()
    w = w / w.sum()
    padded = np.column_stack([np.ones(len(pts)), pts, np.zeros(len(pts))])
    lam = padded[:, :-1] - padded[:, 1:]  # lambda_0 = 1 - x_1, lambda_i = x_i - x_{i+1}, lambda_n = x_n
    return lam, w


def ball_volume(n: int, r: float) -> float:
    return math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r ** n


@dataclass
class MollifiedLoad:
    """``load_j = int phi_y^eps phi_j`` plus geometric bookkeeping."""

    load: np.ndarray
    y: np.ndarray
    eps: float
    measure: float
    cells: np.ndarray
    quadrature_error: float

    @property
    def relative_error(self) -> float:
        return self.quadrature_error / max(self.measure, 1e-300)


def _raw_ball_load(mesh: SimplicialMesh, y: np.ndarray, eps: float, k: int):
    n = mesh.n
    cen = mesh.centroids
    rad = mesh.cell_diameters * (n / (n + 1))  # bounds the centroid-to-vertex distance
    dist = np.linalg.norm(cen - y, axis=1)
    inside = dist + rad <= eps
    cut = ~inside & (dist - rad < eps)
    N = mesh.n_vertices
    raw = np.zeros(N)
    vol = mesh.volumes
    if np.any(inside):
        raw += np.bincount(mesh.cells[inside].ravel(), np.repeat(vol[inside] / (n + 1), n + 1), minlength=N)
    cut_idx = np.nonzero(cut)[0]
    if len(cut_idx):
        lam, w = _reference_subdivision(n, k)
        for chunk in np.array_split(cut_idx, max(1, len(cut_idx) * len(w) // 2_000_000 + 1)):
            P = np.matmul(lam[None], mesh.vertices[mesh.cells[chunk]] - y)  # (m, Q, n), centred at y
            chi = np.einsum("cqk,cqk->cq", P, P) <= eps * eps
            contrib = (chi * w) @ lam * vol[chunk, None]
            raw += np.bincount(mesh.cells[chunk].ravel(), contrib.ravel(), minlength=N)
    return raw, np.nonzero(inside | cut)[0]


def mollified_delta(mesh: SimplicialMesh, y, eps: float, subdivision: int = 4) -> MollifiedLoad:
    """Load vector of the normalized ball indicator at ``y``.

    Cells inside the ball are integrated exactly, cells cut by the sphere
    with an order-2 rule on a ``subdivision^n`` refinement.  The quadrature
    error of ``|Omega cap B_eps(y)|`` is estimated by repeating the cut-cell
    integration at twice the resolution.
    """
    y = np.asarray(y, dtype=float).reshape(-1)
    if not eps > 0:
        raise ValueError(f"mollification radius must be positive, got {eps}")
    locate(mesh, y[None, :])  # raises OutsideDomainError
    raw, cells = _raw_ball_load(mesh, y, eps, subdivision)
    fine, _ = _raw_ball_load(mesh, y, eps, 2 * subdivision)
    measure = float(raw.sum())
    if measure <= 0:
        raise OutsideDomainError(f"ball of radius {eps} around {y.tolist()} misses the mesh")
    err = abs(measure - float(fine.sum()))
    return MollifiedLoad(load=raw / measure, y=y, eps=eps, measure=measure, cells=cells,
                         quadrature_error=err)


def local_mesh_size(mesh: SimplicialMesh, y) -> float:
    cells, _ = locate(mesh, np.asarray(y, dtype=float).reshape(1, -1))
    return float(mesh.cell_diameters[cells[0]])


# ----------------------------------------------------------------------
# Adjoint problems
# ----------------------------------------------------------------------
def _transpose_field(A):
    if A is None:
        return None
    if A.kind == "analytic":
        fn = A.value
        return CoefficientField.analytic(lambda X, fn=fn: np.swapaxes(np.asarray(fn(X)), -1, -2),
                                         A.shape, A.role, bounds=A.bounds)
    return CoefficientField(A.kind, np.swapaxes(A.value, -1, -2), A.shape, A.role, A.bounds)


def adjoint_spec(spec: ProblemSpec) -> ProblemSpec:
    """Spec of ``-div(A^T grad v + c v) + b.grad v + d v`` as a direct problem."""
    if spec.variant != "direct":
        raise ValueError("adjoint_spec expects a direct problem")
    return spec.replace(A=_transpose_field(spec.A), b=spec.c, c=spec.b)


# ----------------------------------------------------------------------
# Green tables
# ----------------------------------------------------------------------
@dataclass
class GreenTable:
    """Columns ``G_eps(., y_k)`` as nodal values ``values[:, k]``."""

    spec: ProblemSpec
    sources: np.ndarray
    eps: np.ndarray
    values: np.ndarray
    loads: np.ndarray
    variant: str
    residuals: np.ndarray
    ball_errors: np.ndarray
    norms: list = field(default_factory=list)
    operator: ProblemSpec | None = field(default=None, repr=False)

    @property
    def mesh(self) -> SimplicialMesh:
        return self.spec.mesh

    def column(self, k: int) -> FeFunction:
        return FeFunction(self.mesh, self.values[:, k], name=f"G(.,y{k})")

    def mollified_values(self) -> np.ndarray:
        """``S[j, k] = int phi_{y_j}^eps G_eps(., y_k)``."""
        return self.loads.T @ self.values

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x_index", "y_index", "value"])
        for k in range(self.values.shape[1]):
            for j, v in enumerate(self.values[:, k]):
                w.writerow([j, k, repr(float(v))])
        return buf.getvalue()

    def norms_json(self) -> str:
        return json.dumps({"variant": self.variant, "sources": self.sources.tolist(),
                           "eps": self.eps.tolist(), "norms": self.norms}, indent=2, sort_keys=True)


def _eps_for(mesh, y, rule) -> float:
    if rule is None:
        return 2.0 * local_mesh_size(mesh, y)
    if callable(rule):
        return float(rule(mesh, y))
    return float(rule)


def green_norms(mesh: SimplicialMesh, column: np.ndarray) -> dict:
    """Weak norms of ``G``, ``grad G`` and the boundary trace of ``G``."""
    n = mesh.n
    G = FeFunction(mesh, column)
    out = {
        "G_weak": weak_norm(G, n / (n - 2)).value,
        "gradG_weak": weak_norm(gradient_field(G), n / (n - 1)).value,
        "G_boundary_weak": weak_norm(TraceFunction(mesh, np.arange(len(mesh.boundary_facets)), column),
                                     (n - 1) / (n - 2)).value,
    }
    return out


def green_table(spec: ProblemSpec, sources, eps=None, norms: bool = True,
                subdivision: int = 4) -> GreenTable:
    """One factorization, one solve per source.

    ``eps`` is a number, a callable ``(mesh, y) -> eps`` or ``None`` for
    twice the diameter of the cell containing ``y``.
    """
    mesh = spec.mesh
    Y = np.atleast_2d(np.asarray(sources, dtype=float))
    if eps is not None and not callable(eps) and np.ndim(eps) == 1:
        eps_list = np.asarray(eps, dtype=float)
    else:
        eps_list = np.array([_eps_for(mesh, y, eps) for y in Y])
    mol = [mollified_delta(mesh, y, e, subdivision) for y, e in zip(Y, eps_list)]
    P = np.column_stack([m.load for m in mol])
    ball_err = np.array([m.relative_error for m in mol])
    if is_mean_zero_case(spec):
        if not _pair_vanishes(spec, "cd"):
            raise KernelError("int d = 0 Green function needs int c.grad psi + d psi = 0 on all hats")
        op = spec.replace(variant="reduced-drift")
        system = assemble_forms(op)
        m = mass_lumped(mesh)
        rhs = P - m[:, None] / mesh.volume
        S = sp.bmat([[system.K, sp.csr_matrix(m[:, None])], [sp.csr_matrix(m[None, :]), None]]).tocsc()
        sol = spla.splu(S).solve(np.vstack([rhs, np.zeros((1, rhs.shape[1]))]))
        values = sol[:-1]
        res = np.linalg.norm(system.K @ values + np.outer(m, sol[-1]) - rhs, axis=0)
        variant = "mean_zero"
    else:
        op = spec
        system = assemble_forms(op)
        values = system.lu().solve(P)
        values = values.reshape(P.shape)
        res = np.linalg.norm(system.K @ values - P, axis=0)
        variant = "positive"
    rel = res / np.maximum(np.linalg.norm(P, axis=0), 1e-300)
    table = GreenTable(spec=spec, sources=Y, eps=eps_list, values=values, loads=P, variant=variant,
                       residuals=rel, ball_errors=ball_err, operator=op)
    if norms:
        table.norms = [green_norms(mesh, values[:, k]) for k in range(values.shape[1])]
    return table


def green_column(spec: ProblemSpec, y, eps=None) -> FeFunction:
    return green_table(spec, [y], eps, norms=False).column(0)


def pointwise_bound_constant(table: GreenTable, exclusion: float = 2.0) -> dict:
    """``sup |x - y|^{n-2} |G(x, y)|`` over vertices with ``|x - y| >= exclusion * eps``."""
    mesh = table.mesh
    n = mesh.n
    best, where = 0.0, None
    for k, y in enumerate(table.sources):
        r = np.linalg.norm(mesh.vertices - y, axis=1)
        ok = r >= exclusion * table.eps[k]
        if not np.any(ok):
            continue
        vals = r[ok] ** (n - 2) * np.abs(table.values[ok, k])
        i = int(np.argmax(vals))
        if vals[i] > best:
            best, where = float(vals[i]), (int(np.nonzero(ok)[0][i]), k)
    return {"constant": best, "argmax": where}


# ----------------------------------------------------------------------
# Representation formula and duality
# ----------------------------------------------------------------------
def _pair_with_data(table: GreenTable, k: int, f=None, F=None, g=None, gamma="all") -> float:
    """``int G f + int grad G.F + int_Gamma G g`` by quadrature against column ``k``."""
    mesh = table.mesh
    col = table.values[:, k]
    rule = simplex_rule(mesh.n, 6)
    W = _weights(mesh, rule)
    total = 0.0
    if f is not None:
        fq = np.asarray(_values_at(_coerce(f), mesh, rule, "cells", np.arange(mesh.n_cells)), dtype=float)
        total += float(np.sum(W * fq * (col[mesh.cells] @ rule.points.T)))
    if F is not None:
        Fq = np.asarray(_values_at(_coerce(F, (mesh.n,)), mesh, rule, "cells", np.arange(mesh.n_cells)))
        grad = FeFunction(mesh, col).gradients()
        total += float(np.einsum("cq,cqk,ck->", W, Fq, grad))
    if g is not None:
        idx = mesh.facets_tagged(gamma) if isinstance(gamma, str) else np.asarray(gamma)
        frule = simplex_rule(mesh.n - 1, 6)
        gq = np.asarray(_values_at(_coerce(g), mesh, frule, "facets", idx), dtype=float)
        Wf = mesh.facet_areas[idx, None] * frule.weights[None, :] * math.factorial(mesh.n - 1)
        total += float(np.sum(Wf * gq * (col[mesh.boundary_facets[idx]] @ frule.points.T)))
    return total


def _coerce(x, shape=()):
    from .fe import as_field
    if isinstance(x, (FeFunction, TraceFunction)):
        return x
    return as_field(x, shape=shape)


@dataclass
class RepresentationReport:
    v_rep: np.ndarray
    v_direct: np.ndarray
    v_mollified: np.ndarray

    @property
    def relative_error(self) -> float:
        scale = max(float(np.max(np.abs(self.v_direct))), 1e-300)
        return float(np.max(np.abs(self.v_rep - self.v_direct))) / scale


def represent_solution(table: GreenTable, f=None, F=None, g=None, gamma="all") -> RepresentationReport:
    """Evaluate ``v(y) = int G f + int grad G.F + int G g`` at every source.

    ``v`` solves the adjoint problem; it is also computed directly and
    evaluated at the sources (pointwise and against the mollifier).
    """
    if table.variant != "positive":
        raise NotImplementedError("representation is implemented for the int d > 0 tables")
    spec = table.spec
    rep = np.array([_pair_with_data(table, k, f, F, g, gamma) for k in range(len(table.sources))])
    if f is None and F is None and g is None:
        z = np.zeros(len(table.sources))
        return RepresentationReport(rep, z, z)
    adj = adjoint_spec(spec).replace(f=f, F=F, g=g, gamma=gamma)
    v = solve_neumann(adj).u
    direct = np.asarray(v.evaluate(table.sources), dtype=float).reshape(-1)
    moll = table.loads.T @ v.values
    return RepresentationReport(rep, direct, moll)


def duality_pairing(table: GreenTable, k: int, f) -> tuple[float, float]:
    """``(int phi_y^eps v, int G_eps(., y) f)`` with ``v`` the adjoint solution for data ``f``.

    The left side uses the adjoint system, the right side quadrature against
    the Green column; they agree up to solver round-off.
    """
    spec = table.spec
    adj = assemble_forms(adjoint_spec(spec).replace(f=f, F=None, g=None))
    v = adj.lu().solve(adj.load)
    lhs = float(table.loads[:, k] @ v)
    rule = simplex_rule(spec.mesh.n, max(2, spec.order))
    W = _weights(spec.mesh, rule)
    fq = _sample(adj.spec, "f", rule)
    rhs = float(np.sum(W * fq * (table.values[spec.mesh.cells, k] @ rule.points.T)))
    return lhs, rhs


# ----------------------------------------------------------------------
# Symmetry and scaling
# ----------------------------------------------------------------------
@dataclass
class SymmetryReport:
    mode: str
    deviation: float
    scale: float
    bd_holds: bool
    cd_holds: bool

    @property
    def relative(self) -> float:
        return self.deviation / max(self.scale, 1e-300)


def check_symmetry(spec: ProblemSpec, sources, eps=None, mode: str = "matched") -> SymmetryReport:
    """Compare ``G(x, y)`` with ``G*(y, x)``.

    ``mode="matched"`` evaluates both kernels against the same mollifiers,
    ``S[j, k] = int phi_{y_j} G(., y_k)``; the two discrete systems are exact
    transposes, so the deviation is at round-off level.  ``mode="nodal"``
    compares nodal values at the source points themselves, which carries the
    mollification error and shrinks under refinement.
    """
    from .assembly import check_sign_condition

    bd = check_sign_condition(spec, "bd").holds
    cd = check_sign_condition(spec, "cd").holds
    direct = green_table(spec, sources, eps, norms=False)
    adjoint = green_table(adjoint_spec(spec), sources, direct.eps, norms=False)
    if mode == "matched":
        S = direct.mollified_values()
        T = adjoint.mollified_values()
    elif mode == "nodal":
        mesh = spec.mesh
        S = np.stack([FeFunction(mesh, direct.values[:, k]).evaluate(direct.sources) for k in range(len(direct.sources))], axis=1)
        T = np.stack([FeFunction(mesh, adjoint.values[:, k]).evaluate(adjoint.sources) for k in range(len(adjoint.sources))], axis=1)
        off = ~np.eye(len(S), dtype=bool)
        S, T = np.where(off, S, 0.0), np.where(off, T, 0.0)
    else:
        raise ValueError(f"unknown symmetry mode {mode!r}")
    dev = float(np.max(np.abs(S - T.T)))
    return SymmetryReport(mode=mode, deviation=dev, scale=float(np.max(np.abs(S))), bd_holds=bd, cd_holds=cd)


@dataclass
class ScalingReport:
    r: float
    deviation: float
    scale: float
    constants: tuple

    @property
    def relative(self) -> float:
        return self.deviation / max(self.scale, 1e-300)


def check_green_scaling(spec: ProblemSpec, r: float, sources, eps=None) -> ScalingReport:
    """``max |G_Omega(x, y) - r^{2-n} G_{Omega/r}(x/r, y/r)|`` over vertices."""
    n = spec.mesh.n
    base = green_table(spec, sources, eps, norms=False)
    scaled_spec = scale_problem(spec, r)
    scaled = green_table(scaled_spec, base.sources / r, base.eps / r, norms=False)
    dev = float(np.max(np.abs(base.values - r ** (2 - n) * scaled.values)))
    consts = (pointwise_bound_constant(base)["constant"], pointwise_bound_constant(scaled)["constant"])
    return ScalingReport(r=r, deviation=dev, scale=float(np.max(np.abs(base.values))), constants=consts)
