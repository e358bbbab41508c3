"""Galerkin assembly and solvers for the Neumann problem

    -div(A grad u + b u) + c.grad u + d u = f - div F   in Omega,
    (A grad u + b u - F).nu = g                          on Gamma,

with P1 elements.  The bilinear form is

    B[u, phi] = int A grad u.grad phi + b u.grad phi + c phi.grad u + d u phi,

and the system matrix has ``K[i, j] = B[phi_j, phi_i]`` (rows are test
functions).  The adjoint operator ``-div(A^T grad v + c v) + b.grad v + d v``
therefore has matrix ``K^T``; the ``"adjoint"`` variant assembles it
directly from ``A^T`` with ``b`` and ``c`` exchanged so the identity can be
checked rather than assumed.
"""
from __future__ import annotations

import dataclasses
import logging
import math
from dataclasses import dataclass, field
from typing import Any

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .fe import (CoefficientField, FeFunction, P0Field, TraceFunction, _values_at, as_field,
                 check_ellipticity, lp_norm, mass_lumped)
from .mesh import SimplicialMesh, dilate_mesh
from .quadrature import simplex_rule

log = logging.getLogger(__name__)

VARIANTS = ("direct", "adjoint", "reduced-drift")
DIRECT_LIMIT = 50_000
DENSE_SVD_LIMIT = 2500
GAP_RATIO = 10.0
NULL_RATIO = 0.1


class ProblemError(ValueError):
    """Invalid problem specification."""


class CompatibilityError(ValueError):
    """Data are not orthogonal to the kernel of the adjoint problem."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class KernelError(ValueError):
    """The kernel could not be determined or the operator does not reduce."""


# ----------------------------------------------------------------------
# Problem specification
# ----------------------------------------------------------------------
_SHAPES = {"A": 2, "b": 1, "c": 1, "d": 0, "f": 0, "F": 1, "g": 0}


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Mesh, coefficients, data and variant of one Neumann problem.

    Coefficients and data accept constants, callables on ``(m, n)`` point
    arrays, :class:`CoefficientField`, :class:`P0Field`; ``f`` and ``g`` may
    also be :class:`FeFunction`.  ``A=None`` means the identity; any other
    ``None`` means zero.  ``gamma`` selects the boundary facets carrying
    ``g`` (a tag, ``"all"``, or an index array).
    """

    mesh: SimplicialMesh
    A: Any = None
    b: Any = None
    c: Any = None
    d: Any = None
    f: Any = None
    F: Any = None
    g: Any = None
    bounds: tuple | None = None
    variant: str = "direct"
    gamma: Any = "all"
    order: int = 4
    label: str = ""

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ProblemError(f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        n = self.mesh.n
        for name, rank in _SHAPES.items():
            val = getattr(self, name)
            if val is None or isinstance(val, (FeFunction, TraceFunction)):
                continue
            shape = (n,) * rank
            fld = as_field(val, role=name, shape=shape)
            if fld.kind != "analytic" and tuple(fld.shape) != shape:
                raise ProblemError(f"{name} has shape {tuple(fld.shape)}, expected {shape}")
            if fld.kind == "cell" and len(fld.value) != self.mesh.n_cells:
                raise ProblemError(f"{name} has {len(fld.value)} cell values for {self.mesh.n_cells} cells")
            if fld.kind == "facet" and len(fld.value) != len(self.mesh.boundary_facets):
                raise ProblemError(f"{name} has {len(fld.value)} facet values")
            object.__setattr__(self, name, fld)
        self.gamma_facets()

    def replace(self, **kw) -> "ProblemSpec":
        return dataclasses.replace(self, **kw)

    def gamma_facets(self) -> np.ndarray:
        if isinstance(self.gamma, str):
            return self.mesh.facets_tagged(self.gamma)
        idx = np.asarray(self.gamma, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= len(self.mesh.boundary_facets)):
            raise ProblemError("gamma contains facet indices outside the boundary")
        return idx

    def has(self, name: str) -> bool:
        v = getattr(self, name)
        return v is not None and not (isinstance(v, CoefficientField) and v.is_zero)


def _zero_like(m, nq, shape):
    return np.zeros((m, nq) + shape)


def _sample(spec: ProblemSpec, name: str, rule, cells=None) -> np.ndarray:
    """Raw (untransformed) coefficient at cell quadrature points."""
    mesh = spec.mesh
    idx = np.arange(mesh.n_cells) if cells is None else cells
    n = mesh.n
    val = getattr(spec, name)
    if val is None:
        if name == "A":
            return np.broadcast_to(np.eye(n), (len(idx), rule.size, n, n))
        return _zero_like(len(idx), rule.size, (n,) * _SHAPES[name])
    return np.asarray(_values_at(val, mesh, rule, "cells", idx), dtype=float)


def effective_coefficient(spec: ProblemSpec, name: str, rule, cells=None) -> np.ndarray:
    """Coefficient of the operator actually assembled for ``spec.variant``."""
    v = spec.variant
    if name == "A":
        A = _sample(spec, "A", rule, cells)
        return np.swapaxes(A, -1, -2) if v == "adjoint" else A
    if name == "b":
        if v == "adjoint":
            return _sample(spec, "c", rule, cells)
        if v == "reduced-drift":
            return _sample(spec, "b", rule, cells) - _sample(spec, "c", rule, cells)
        return _sample(spec, "b", rule, cells)
    if name == "c":
        if v == "adjoint":
            return _sample(spec, "b", rule, cells)
        if v == "reduced-drift":
            return _sample(spec, "c", rule, cells) * 0.0
        return _sample(spec, "c", rule, cells)
    if name == "d":
        d = _sample(spec, "d", rule, cells)
        return d * 0.0 if v == "reduced-drift" else d
    return _sample(spec, name, rule, cells)


# ----------------------------------------------------------------------
# Assembly
# ----------------------------------------------------------------------
@dataclass(eq=False)
class System:
    """Assembled matrix ``K = K_A + K_b + K_c + K_d`` and load vector."""

    spec: ProblemSpec
    K: sp.csr_matrix
    parts: dict
    load: np.ndarray
    load_parts: dict
    warnings: list = field(default_factory=list)
    _lu: Any = field(default=None, repr=False)

    @property
    def size(self) -> int:
        return self.K.shape[0]

    def lu(self):
        if self._lu is None:
            self._lu = spla.splu(self.K.tocsc())
        return self._lu


def _scatter(mesh: SimplicialMesh, local: np.ndarray) -> sp.csr_matrix:
    """Sum (nc, n+1, n+1) local matrices into a global CSR matrix."""
    cells = mesh.cells
    k = cells.shape[1]
    rows = np.repeat(cells, k, axis=1).ravel()
    cols = np.tile(cells, (1, k)).ravel()
    N = mesh.n_vertices
    return sp.coo_matrix((local.ravel(), (rows, cols)), shape=(N, N)).tocsr()


def _cell_rule(spec: ProblemSpec):
    return simplex_rule(spec.mesh.n, max(2, spec.order))


def _weights(mesh: SimplicialMesh, rule) -> np.ndarray:
    """(nc, nq) physical quadrature weights."""
    return mesh.volumes[:, None] * rule.weights[None, :] * math.factorial(mesh.n)


def assemble_forms(spec: ProblemSpec, check: bool = True) -> System:
    mesh = spec.mesh
    rule = _cell_rule(spec)
    W = _weights(mesh, rule)
    G = mesh.barycentric_gradients  # (nc, n+1, n)
    lam = rule.points  # (nq, n+1)
    warnings: list[str] = []

    A = effective_coefficient(spec, "A", rule)
    Abar = np.einsum("cq,cqij->cij", W, A, optimize=True)
    KA = np.matmul(np.matmul(G, Abar), np.swapaxes(G, 1, 2))

    b = effective_coefficient(spec, "b", rule)
    Bm = np.matmul(lam.T, W[..., None] * b)  # (c, j, k): int b phi_j
    Kb = np.matmul(G, np.swapaxes(Bm, 1, 2))

    c = effective_coefficient(spec, "c", rule)
    Cm = np.matmul(lam.T, W[..., None] * c)  # (c, i, k): int c phi_i
    Kc = np.matmul(Cm, np.swapaxes(G, 1, 2))

    d = effective_coefficient(spec, "d", rule)
    Kd = np.matmul(lam.T, (W * d)[..., None] * lam)

    parts = {"A": _scatter(mesh, KA), "b": _scatter(mesh, Kb), "c": _scatter(mesh, Kc), "d": _scatter(mesh, Kd)}
    K = (parts["A"] + parts["b"] + parts["c"] + parts["d"]).tocsr()
    load, load_parts = assemble_load(spec)
    if check and spec.A is not None and spec.variant != "adjoint":
        rep = check_ellipticity(spec.A, mesh, spec.bounds, order=2)
        if not rep["ok"]:
            msg = f"ellipticity check failed: {rep}"
            log.warning(msg)
            warnings.append(msg)
    return System(spec=spec, K=K, parts=parts, load=load, load_parts=load_parts, warnings=warnings)


def assemble_load(spec: ProblemSpec):
    mesh = spec.mesh
    N = mesh.n_vertices
    rule = _cell_rule(spec)
    W = _weights(mesh, rule)
    G = mesh.barycentric_gradients
    out = {}
    f = _sample(spec, "f", rule)
    loc = (W * f) @ rule.points
    out["f"] = np.bincount(mesh.cells.ravel(), loc.ravel(), minlength=N)
    F = _sample(spec, "F", rule)
    loc = np.matmul(G, np.einsum("cq,cqk->ck", W, F)[..., None])[..., 0]
    out["F"] = np.bincount(mesh.cells.ravel(), loc.ravel(), minlength=N)
    out["g"] = np.zeros(N)
    if spec.g is not None:
        idx = spec.gamma_facets()
        if len(idx):
            frule = simplex_rule(mesh.n - 1, max(2, spec.order))
            g = np.asarray(_values_at(spec.g, mesh, frule, "facets", idx), dtype=float)
            Wf = mesh.facet_areas[idx, None] * frule.weights[None, :] * math.factorial(mesh.n - 1)
            loc = (Wf * g) @ frule.points
            out["g"] = np.bincount(mesh.boundary_facets[idx].ravel(), loc.ravel(), minlength=N)
    return out["f"] + out["F"] + out["g"], out


# ----------------------------------------------------------------------
# Sign conditions
# ----------------------------------------------------------------------
@dataclass
class ConditionReport:
    """Hat functionals ``v_j = int b.grad phi_j + d phi_j`` (or the c-pair)."""

    pair: str
    values: np.ndarray
    min_value: float
    tol: float
    integral_d: float
    delta0: float
    div_b: np.ndarray
    b_dot_nu: np.ndarray
    holds: bool
    sum_error: float

    @property
    def worst_vertex(self) -> int:
        return int(np.argmin(self.values))

    def summary(self) -> dict:
        return {
            "pair": self.pair, "holds": self.holds, "min_value": self.min_value, "tol": self.tol,
            "integral_d": self.integral_d, "delta0": self.delta0,
            "max_div_b": float(self.div_b.max()) if self.div_b.size else 0.0,
            "min_b_dot_nu": float(self.b_dot_nu.min()) if self.b_dot_nu.size else 0.0,
            "sum_error": self.sum_error,
        }


def hat_functionals(spec: ProblemSpec, pair: str = "bd"):
    """``v_j`` for every hat together with a per-hat magnitude scale."""
    if pair not in ("bd", "cd"):
        raise ProblemError(f"pair must be 'bd' or 'cd', got {pair!r}")
    mesh = spec.mesh
    rule = _cell_rule(spec)
    W = _weights(mesh, rule)
    vec = effective_coefficient(spec, pair[0], rule)
    d = effective_coefficient(spec, "d", rule)
    vbar = np.einsum("cq,cqk->ck", W, vec)
    drift = np.einsum("cik,ck->ci", mesh.barycentric_gradients, vbar)
    react = (W * d) @ rule.points
    N = mesh.n_vertices
    flat = mesh.cells.ravel()
    v = np.bincount(flat, (drift + react).ravel(), minlength=N)
    scale = np.bincount(flat, (np.abs(drift) + np.abs(react)).ravel(), minlength=N)
    return v, scale


def condition_functional(spec: ProblemSpec, phi: FeFunction, pair: str = "bd") -> float:
    """``int b.grad phi + d phi`` by direct quadrature (independent of the hats)."""
    mesh = spec.mesh
    rule = _cell_rule(spec)
    W = _weights(mesh, rule)
    vec = effective_coefficient(spec, pair[0], rule)
    d = effective_coefficient(spec, "d", rule)
    grad = phi.gradients()
    vals = phi.values[mesh.cells] @ rule.points.T
    return float(np.sum(W * (np.einsum("cqk,ck->cq", vec, grad) + d * vals)))


def _cell_divergence(spec: ProblemSpec, name: str) -> np.ndarray:
    """Average divergence per cell from the outward flux through its faces.

    Analytic fields use face quadrature; piecewise-constant fields use the
    mean of the two adjacent cell values on interior faces.
    """
    mesh = spec.mesh
    n = mesh.n
    raw = getattr(spec, name)
    if raw is None:
        return np.zeros(mesh.n_cells)
    G = mesh.barycentric_gradients
    vol = mesh.volumes
    # outward normal times area of the face opposite vertex i: -n |T| grad lambda_i
    nA = -n * vol[:, None, None] * G
    if isinstance(raw, CoefficientField) and raw.kind == "analytic":
        frule = simplex_rule(n - 1, 4)
        local = np.array([[j for j in range(n + 1) if j != i] for i in range(n + 1)])
        flux = np.zeros(mesh.n_cells)
        for i in range(n + 1):
            X = mesh.vertices[mesh.cells[:, local[i]]]
            pts = np.matmul(frule.points, X)
            vals = np.asarray(raw.value(pts.reshape(-1, n)), dtype=float).reshape(mesh.n_cells, frule.size, n)
            avg = np.tensordot(vals, frule.weights, axes=([1], [0])) * math.factorial(n - 1)
            flux += np.einsum("ck,ck->c", avg, nA[:, i])
        return flux / vol
    cellv = np.asarray(as_field(raw, shape=(n,)).cell_average(mesh))
    faces, uniq, inverse, counts = mesh._faces
    nf = len(uniq)
    acc = np.zeros((nf, n))
    np.add.at(acc, inverse, np.repeat(cellv, n + 1, axis=0))
    face_val = acc / counts[:, None]
    fv = face_val[inverse].reshape(mesh.n_cells, n + 1, n)
    return np.einsum("cik,cik->c", fv, nA) / vol


def _facet_normal_component(spec: ProblemSpec, name: str) -> np.ndarray:
    mesh = spec.mesh
    raw = getattr(spec, name)
    nf = len(mesh.boundary_facets)
    if raw is None:
        return np.zeros(nf)
    frule = simplex_rule(mesh.n - 1, 4)
    vals = np.asarray(_values_at(raw, mesh, frule, "facets", np.arange(nf)), dtype=float)
    avg = np.tensordot(vals, frule.weights, axes=([1], [0])) * math.factorial(mesh.n - 1)
    return np.einsum("fk,fk->f", avg, mesh.facet_normals)


def integral_d(spec: ProblemSpec) -> tuple[float, float]:
    """``(int d, delta_0)`` with ``delta_0 = |Omega|^{2/n - 1} int d``."""
    mesh = spec.mesh
    rule = _cell_rule(spec)
    W = _weights(mesh, rule)
    d = effective_coefficient(spec, "d", rule)
    total = float(math.fsum(np.sum(W * d, axis=1)))
    return total, mesh.volume ** (2 / mesh.n - 1) * total


def _d_l1(spec: ProblemSpec) -> float:
    rule = _cell_rule(spec)
    W = _weights(spec.mesh, rule)
    return float(np.sum(W * np.abs(effective_coefficient(spec, "d", rule))))


def check_sign_condition(spec: ProblemSpec, pair: str = "bd") -> ConditionReport:
    """Check ``int b.grad phi + d phi >= 0`` for all nonnegative P1 ``phi``.

    The functional is linear and nonnegative P1 functions are nonnegative
    combinations of hats, so checking the hats is exact on the discrete cone.
    """
    v, scale = hat_functionals(spec, pair)
    tol = 1e-12 * max(float(scale.max()) if scale.size else 0.0, 1e-300)
    total, delta0 = integral_d(spec)
    vec = "b" if (pair == "bd") == (spec.variant != "adjoint") else "c"
    div = _cell_divergence(spec, vec)
    bn = _facet_normal_component(spec, vec)
    return ConditionReport(
        pair=pair, values=v, min_value=float(v.min()), tol=tol, integral_d=total, delta0=delta0,
        div_b=div, b_dot_nu=bn, holds=bool(v.min() >= -tol),
        sum_error=abs(float(math.fsum(v)) - total),
    )


def _pair_vanishes(spec: ProblemSpec, pair: str) -> bool:
    v, scale = hat_functionals(spec, pair)
    return bool(np.max(np.abs(v)) <= 1e-10 * max(float(scale.max()), 1e-300))


# ----------------------------------------------------------------------
# Kernel analysis
# ----------------------------------------------------------------------
@dataclass
class KernelReport:
    singular_values: np.ndarray
    dimension: Any  # int or "ambiguous"
    candidates: tuple
    gap: float
    null_ratios: np.ndarray
    basis: list
    residuals: np.ndarray
    uhat: FeFunction | None = None
    uhat_positive: bool | None = None
    method: str = "dense"

    @property
    def ambiguous(self) -> bool:
        return self.dimension == "ambiguous"

    def summary(self) -> dict:
        return {
            "singular_values": [float(s) for s in self.singular_values],
            "dimension": self.dimension, "candidates": list(self.candidates), "gap": self.gap,
            "null_ratios": [float(x) for x in self.null_ratios], "method": self.method,
            "uhat_positive": self.uhat_positive,
        }


def _smallest_singular(Ks: sp.spmatrix, k: int):
    """``k`` smallest singular values and right singular vectors of ``Ks``."""
    N = Ks.shape[0]
    k = min(k, N)
    if N <= DENSE_SVD_LIMIT:
        _, s, Vt = scipy.linalg.svd(Ks.toarray())
        order = np.argsort(s)[:k]
        return s[order], Vt[order].T, "dense"
    KtK = (Ks.T @ Ks).tocsc()
    tau = 1e-9 * float(abs(KtK).sum(axis=1).max())
    rng = np.random.default_rng(0)
    vals, vecs = spla.eigsh(KtK, k=k, sigma=-tau, which="LM", v0=rng.standard_normal(N), tol=1e-14)
    order = np.argsort(vals)
    vecs = vecs[:, order]
    # singular values from the residual are accurate even when sigma^2 underflows
    s = np.linalg.norm(Ks @ vecs, axis=0)
    return s, vecs, "shift-invert"


def lp_exponent(n: int) -> float:
    return 2 * n / (n - 2) if n > 2 else 2.0


def kernel_analysis(spec_or_system, k: int = 6, transpose: bool = False) -> KernelReport:
    """Numerical kernel of ``K`` (or of ``K^T``) by a spectral-gap rule.

    Singular values are those of ``D^{-1/2} K D^{-1/2}`` with ``D`` the
    lumped mass, so they approximate eigenvalues of the continuous operator.
    A gap alone cannot tell a small eigenvalue from a true kernel vector, so
    each candidate must also show cancellation between the four parts of
    ``K``: ``||K z|| <= 0.1 (||K_A z|| + ||K_b z|| + ||K_c z|| + ||K_d z||)``.
    """
    system = spec_or_system if isinstance(spec_or_system, System) else assemble_forms(spec_or_system)
    mesh = system.spec.mesh
    K = system.K.T.tocsr() if transpose else system.K
    parts = {name: (P.T.tocsr() if transpose else P) for name, P in system.parts.items()}
    Dm = mass_lumped(mesh)
    Dh = sp.diags(1 / np.sqrt(Dm))
    Ks = (Dh @ K @ Dh).tocsr()
    s, V, method = _smallest_singular(Ks, k)
    Z = V / np.sqrt(Dm)[:, None]

    def weighted(M, z):
        return np.linalg.norm((M @ z) / np.sqrt(Dm))

    Knorm = float(abs(Ks).sum(axis=1).max())
    ratios = np.empty(len(s))
    residuals = np.empty(len(s))
    for i in range(len(s)):
        z = Z[:, i]
        total = weighted(K, z)
        residuals[i] = total
        denom = sum(weighted(P, z) for P in parts.values())
        zn = np.linalg.norm(z * np.sqrt(Dm))
        if total <= 1e-11 * Knorm * zn or denom == 0:
            ratios[i] = 0.0
        else:
            ratios[i] = total / denom
    floor = np.finfo(float).tiny
    gaps = s[1:] / np.maximum(s[:-1], floor)
    j = int(np.argmax(gaps)) if len(gaps) else 0
    gap = float(gaps[j]) if len(gaps) else math.inf
    null = ratios <= NULL_RATIO
    if gap >= GAP_RATIO:
        cand = j + 1
        if np.all(null[:cand]):
            dim = cand
            if cand < len(s) and null[cand]:
                dim = "ambiguous"
        elif not np.any(null[:cand]):
            dim = 0
        else:
            dim = "ambiguous"
        candidates = (0, cand)
    else:
        candidates = (0, int(np.sum(null)))
        dim = 0 if not np.any(null) else "ambiguous"
    ndim = dim if isinstance(dim, int) else candidates[1]
    # columns of Z are orthonormal in the lumped-mass inner product
    basis = [FeFunction(mesh, Z[:, i], name=f"ker{i}") for i in range(ndim)]
    rep = KernelReport(singular_values=s, dimension=dim, candidates=candidates, gap=gap,
                       null_ratios=ratios, basis=basis, residuals=residuals, method=method)
    if dim == 1:
        z = Z[:, 0].copy()
        if z.sum() < 0:
            z = -z
        u = FeFunction(mesh, z)
        z = z / lp_norm(u, lp_exponent(mesh.n))
        rep.uhat = FeFunction(mesh, z, name="uhat")
        rep.uhat_positive = bool(np.all(z > 0))
    return rep


# ----------------------------------------------------------------------
# Solvers
# ----------------------------------------------------------------------
@dataclass
class SolveResult:
    u: FeFunction
    residual: float
    branch: str
    multiplier: float = 0.0
    compatibility: float = 0.0
    integral_d: float = 0.0
    warnings: list = field(default_factory=list)
    system: System | None = field(default=None, repr=False)
    transpose_error: float | None = None

    def summary(self) -> dict:
        return {
            "branch": self.branch, "residual": self.residual, "multiplier": self.multiplier,
            "compatibility": self.compatibility, "integral_d": self.integral_d,
            "warnings": list(self.warnings), "transpose_error": self.transpose_error,
        }


def _sparse_solve(K: sp.spmatrix, rhs: np.ndarray, lu=None) -> np.ndarray:
    if K.shape[0] <= DIRECT_LIMIT:
        lu = lu or spla.splu(K.tocsc())
        return lu.solve(rhs)
    diag = K.diagonal()
    M = sp.diags(1 / np.where(diag != 0, diag, 1.0))
    x, info = spla.gmres(K, rhs, M=M, rtol=1e-13, restart=200, maxiter=2000)
    if info != 0:
        raise RuntimeError(f"GMRES did not converge (info={info})")
    return x


def is_mean_zero_case(spec: ProblemSpec) -> bool:
    total, _ = integral_d(spec)
    return abs(total) <= 1e-10 * _d_l1(spec) or _d_l1(spec) == 0.0


def left_null_vector(system: System) -> np.ndarray:
    """Vector ``w`` with ``w^T K = 0`` for a reducible ``int d = 0`` operator.

    If the c-pair functional vanishes, constants are left null vectors (the
    classical compatibility condition).  If the b-pair vanishes, the left null
    vector is the kernel of ``K^T``.
    """
    spec = system.spec
    if _pair_vanishes(spec, "cd"):
        return np.ones(system.size)
    if _pair_vanishes(spec, "bd"):
        rep = kernel_analysis(system, transpose=True)
        if rep.dimension != 1:
            raise KernelError(f"adjoint kernel dimension is {rep.dimension}, expected 1")
        return rep.uhat.values
    raise KernelError("int d = 0 but neither int c.grad psi + d psi nor int b.grad psi + d psi "
                      "vanishes on all hats; the operator does not reduce to drift form")


def solve_neumann(spec_or_system, compat_tol: float = 1e-8) -> SolveResult:
    """Solve the discrete Neumann problem.

    ``int d > 0``: direct factorization.  ``int d = 0``: saddle system
    ``[[K, m], [m^T, 0]]`` with ``m_i = int phi_i`` giving the mean-zero
    solution; the multiplier vanishes exactly when the data are compatible.
    """
    system = spec_or_system if isinstance(spec_or_system, System) else assemble_forms(spec_or_system)
    spec = system.spec
    K, load = system.K, system.load
    mesh = spec.mesh
    warnings = list(system.warnings)
    total, _ = integral_d(spec)
    lnorm = float(np.linalg.norm(load))
    if not is_mean_zero_case(spec):
        if total < 0:
            warnings.append(f"int d = {total:.6g} < 0: outside the range covered by the theory")
        elif total < 1e-6 * _d_l1(spec):
            warnings.append(f"int d = {total:.3e} is nearly zero; the system is ill conditioned")
        u = _sparse_solve(K, load, system.lu() if system.size <= DIRECT_LIMIT else None)
        res = float(np.linalg.norm(K @ u - load))
        return SolveResult(FeFunction(mesh, u), res, "direct", integral_d=total,
                           warnings=warnings, system=system)
    w = left_null_vector(system)
    m = mass_lumped(mesh)
    comp = float(w @ load)
    scale = float(np.abs(w) @ np.abs(load))
    if abs(comp) > compat_tol * max(scale, 1e-300) and abs(comp) > 1e-300:
        raise CompatibilityError(f"data incompatible: residual {comp:.3e} (scale {scale:.3e})", comp)
    S = sp.bmat([[K, sp.csr_matrix(m[:, None])], [sp.csr_matrix(m[None, :]), None]]).tocsc()
    rhs = np.concatenate([load, [0.0]])
    sol = spla.splu(S).solve(rhs)
    u, lam = sol[:-1], float(sol[-1])
    res = float(np.linalg.norm(K @ u + lam * m - load))
    return SolveResult(FeFunction(mesh, u), res, "mean_zero", multiplier=lam, compatibility=comp,
                       integral_d=total, warnings=warnings, system=system)


def solve_adjoint(spec: ProblemSpec, compat_tol: float = 1e-8) -> SolveResult:
    """Solve ``-div(A^T grad v + c v) + b.grad v + d v = f - div F``."""
    adj = spec.replace(variant="adjoint")
    sys_adj = assemble_forms(adj)
    sys_dir = assemble_forms(spec.replace(variant="direct"), check=False)
    err = float(abs(sys_adj.K - sys_dir.K.T).max()) if sys_adj.K.nnz else 0.0
    res = solve_neumann(sys_adj, compat_tol)
    res.transpose_error = err
    return res


def compatibility_check(spec: ProblemSpec, which: str = "comp1", uhat: FeFunction | None = None) -> float:
    """Signed residual of ``int f + int_Gamma g`` or ``int f uhat + F.grad uhat + int g uhat``."""
    mesh = spec.mesh
    rule = _cell_rule(spec)
    W = _weights(mesh, rule)
    idx = spec.gamma_facets()
    frule = simplex_rule(mesh.n - 1, max(2, spec.order))
    Wf = mesh.facet_areas[idx, None] * frule.weights[None, :] * math.factorial(mesh.n - 1)
    f = _sample(spec, "f", rule)
    g = np.zeros((len(idx), frule.size)) if spec.g is None else \
        np.asarray(_values_at(spec.g, mesh, frule, "facets", idx), dtype=float)
    if which == "comp1":
        return float(np.sum(W * f) + np.sum(Wf * g))
    if which != "comp2":
        raise ProblemError(f"unknown compatibility condition {which!r}")
    if uhat is None:
        rep = kernel_analysis(spec)
        if rep.dimension != 1:
            raise KernelError(f"kernel dimension is {rep.dimension}; comp2 needs a one-dimensional kernel")
        uhat = rep.uhat
    uq = uhat.values[mesh.cells] @ rule.points.T
    ug = uhat.values[mesh.boundary_facets[idx]] @ frule.points.T
    F = _sample(spec, "F", rule)
    Fterm = float(np.sum(np.einsum("cq,cqk->ck", W, F) * uhat.gradients()))
    return float(np.sum(W * f * uq) + Fterm + np.sum(Wf * g * ug))


@dataclass
class ResidualReport:
    r: np.ndarray
    tol: float
    kind: str
    total: float

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.r)))


def residual_vector(spec_or_system, u: FeFunction, tol: float | None = None) -> ResidualReport:
    """``r_j = B[u, phi_j] - load_j`` and its sub/super/solution tag."""
    system = spec_or_system if isinstance(spec_or_system, System) else assemble_forms(spec_or_system)
    r = system.K @ u.values - system.load
    if tol is None:
        tol = 1e-10 * max(float(np.linalg.norm(system.load)), float(np.linalg.norm(abs(system.K) @ np.abs(u.values))))
    if np.all(np.abs(r) <= tol):
        kind = "solution"
    elif np.all(r <= tol):
        kind = "subsolution"
    elif np.all(r >= -tol):
        kind = "supersolution"
    else:
        kind = "neither"
    return ResidualReport(r=r, tol=tol, kind=kind, total=float(math.fsum(r)))


@dataclass
class RigidityReport:
    residual_sum: float
    identity_error: float
    max_positive: float
    max_abs: float
    subsolution: bool
    all_zero: bool

    @property
    def consistent(self) -> bool:
        """A subsolution must be a solution."""
        return (not self.subsolution) or self.all_zero


def subsolution_rigidity(spec_or_system, u: FeFunction) -> RigidityReport:
    """For ``c = 0``, ``d = 0`` and compatible data ``sum_j r_j = 0`` exactly.

    Hence ``r_j <= 0`` for all ``j`` forces ``r = 0``: ``sum |r_j| = -sum r_j``.
    """
    system = spec_or_system if isinstance(spec_or_system, System) else assemble_forms(spec_or_system)
    spec = system.spec
    if spec.has("c") or spec.has("d"):
        raise ProblemError("rigidity needs c = 0 and d = 0")
    rep = residual_vector(system, u)
    r = rep.r
    # B[u, 1] = 0 when c = d = 0: column identity sum_i K_ij = 0
    colsum = np.asarray(system.K.sum(axis=0)).ravel()
    ident = abs(float(colsum @ u.values)) + abs(float(math.fsum(system.load)))
    sub = bool(np.all(r <= rep.tol))
    max_abs = float(np.max(np.abs(r)))
    return RigidityReport(residual_sum=rep.total, identity_error=ident, max_positive=float(r.max()),
                          max_abs=max_abs, subsolution=sub, all_zero=bool(max_abs <= rep.tol))


# ----------------------------------------------------------------------
# Scaling
# ----------------------------------------------------------------------
def _scaled(val, factor: float, r: float, rank: int, n: int):
    """Field ``x' -> factor * val(r x')`` on the dilated mesh."""
    if val is None:
        return None
    if isinstance(val, CoefficientField):
        if val.kind == "analytic":
            fn = val.value
            return CoefficientField.analytic(lambda X, fn=fn: factor * np.asarray(fn(r * np.asarray(X)), dtype=float),
                                             val.shape, val.role, bounds=val.bounds)
        return CoefficientField(val.kind, factor * val.value, val.shape, val.role, val.bounds)
    if isinstance(val, FeFunction):
        raise ProblemError("scale_problem expects coefficient fields, not mesh functions")
    raise ProblemError(f"cannot scale {type(val).__name__}")


def scale_problem(spec: ProblemSpec, r: float) -> ProblemSpec:
    """Problem on ``Omega / r`` with ``A(r.), r b(r.), r c(r.), r^2 d(r.)``
    and data ``r^2 f(r.), r F(r.), r g(r.)``; its solution is ``u(r.)``."""
    if not (r > 0 and math.isfinite(r)):
        raise ProblemError(f"scale factor must be positive, got {r!r}")
    n = spec.mesh.n
    mesh = dilate_mesh(spec.mesh, 1.0 / r)
    factors = {"A": 1.0, "b": r, "c": r, "d": r * r, "f": r * r, "F": r, "g": r}
    kw = {name: _scaled(getattr(spec, name), fac, r, _SHAPES[name], n) for name, fac in factors.items()}
    return dataclasses.replace(spec, mesh=mesh, **kw)


def data_norm(spec: ProblemSpec) -> float:
    """``||f||_{2n/(n+2)} + ||F||_2 + ||g||_{L^{2(n-1)/n}(Gamma)}`` by quadrature."""
    from .fe import field_lp_norm

    mesh = spec.mesh
    n = mesh.n
    total = 0.0
    if spec.f is not None:
        total += field_lp_norm(mesh, spec.f, 2 * n / (n + 2), order=8)
    if spec.F is not None:
        total += field_lp_norm(mesh, spec.F, 2.0, order=8)
    if spec.g is not None:
        idx = spec.gamma_facets()
        total += field_lp_norm(mesh, spec.g, 2 * (n - 1) / n, region=("facets", idx), order=8)
    return total
