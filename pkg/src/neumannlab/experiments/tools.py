"""Shared helpers: random function families, ball quadrature, data norms."""
from __future__ import annotations

import math

import numpy as np
import scipy.sparse as sp

from ..assembly import ProblemSpec
from ..fe import (CoefficientField, FeFunction, P0Field, _values_at, as_field, field_lp_norm,
                  power_integrals)
from ..green import _reference_subdivision
from ..lorentz import lorentz_norm
from ..mesh import SimplicialMesh
from ..quadrature import simplex_rule


# ----------------------------------------------------------------------
# Random families
# ----------------------------------------------------------------------
def averaging_operator(mesh: SimplicialMesh) -> sp.csr_matrix:
    """Row-stochastic vertex-neighbour averaging (self included)."""
    nv, k = mesh.n_vertices, mesh.n + 1
    rows = np.repeat(mesh.cells, k, axis=1).ravel()
    cols = np.tile(mesh.cells, (1, k)).ravel()
    A = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(nv, nv))
    A.data[:] = 1.0
    deg = np.asarray(A.sum(axis=1)).ravel()
    return sp.diags(1.0 / deg) @ A


SMOOTHING_LENGTHS = (0.0, 0.05, 0.1, 0.2, 0.3)  # fractions of the bounding-box diagonal


def random_family(mesh: SimplicialMesh, samples: int, rng: np.random.Generator) -> list:
    """``samples`` nodal vectors, returned as ``(label, values)`` pairs.

    Half are low-frequency trigonometric polynomials in box-normalized
    coordinates (sums of plane waves or separable cosine products), half are
    random nodal fields smoothed by repeated neighbour averaging over a
    physical length (so the family means the same thing on every mesh).
    """
    lo = mesh.vertices.min(axis=0)
    span = mesh.vertices.max(axis=0) - lo
    T = (mesh.vertices - lo) / span
    diag = float(np.linalg.norm(span))
    h = float(np.mean(mesh.cell_diameters))
    avg = averaging_operator(mesh)
    out = []
    n_trig = samples // 2
    for i in range(n_trig):
        v = np.zeros(mesh.n_vertices)
        for _ in range(rng.integers(1, 4)):
            k = rng.integers(0, 4, size=mesh.n)
            if not k.any():
                k[rng.integers(mesh.n)] = 1
            if rng.random() < 0.5:
                term = np.cos(math.pi * T @ k + rng.uniform(0, 2 * math.pi))
            else:
                term = np.prod(np.cos(math.pi * T * k), axis=1)
            v += rng.standard_normal() * term
        out.append((f"trig{i}", v))
    for i in range(samples - n_trig):
        v = rng.standard_normal(mesh.n_vertices)
        ell = float(rng.choice(SMOOTHING_LENGTHS)) * diag
        for _ in range(int(math.ceil((ell / h) ** 2))):
            v = avg @ v
        out.append((f"p1_{i}", v))
    return out


# ----------------------------------------------------------------------
# Quadrature on Omega cap B_r(x0)
# ----------------------------------------------------------------------
def ball_rule(mesh: SimplicialMesh, center, radius: float, subdivision: int = 4):
    """Quadrature for ``Omega cap B``: ``(cells, lam, w)``.

    ``lam`` has shape (m, Q, n+1) (barycentric points), ``w`` shape (m, Q)
    and includes cell volumes.  Cells inside the ball use a degree-4 rule,
    cut cells the Kuhn-refined composite rule with the indicator applied.
    """
    n = mesh.n
    c = np.asarray(center, dtype=float)
    cen = mesh.centroids
    rad = mesh.cell_diameters * (n / (n + 1))
    dist = np.linalg.norm(cen - c, axis=1)
    inside = np.nonzero(dist + rad <= radius)[0]
    cut = np.nonzero((dist + rad > radius) & (dist - rad < radius))[0]
    rule = simplex_rule(n, 4)
    lam_cut, w_cut = _reference_subdivision(n, subdivision)
    Q = max(rule.size, len(w_cut))
    cells = np.concatenate([inside, cut])
    lam = np.zeros((len(cells), Q, n + 1))
    w = np.zeros((len(cells), Q))
    lam[: len(inside), : rule.size] = rule.points
    lam[: len(inside), rule.size:, 0] = 1.0
    w[: len(inside), : rule.size] = rule.weights * math.factorial(n) * mesh.volumes[inside, None]
    if len(cut):
        X = np.matmul(lam_cut[None], mesh.vertices[mesh.cells[cut]])
        chi = np.linalg.norm(X - c, axis=2) <= radius
        lam[len(inside):, : len(w_cut)] = lam_cut
        lam[len(inside):, len(w_cut):, 0] = 1.0
        w[len(inside):, : len(w_cut)] = chi * w_cut * mesh.volumes[cut, None]
    return cells, lam, w


def ball_points(mesh: SimplicialMesh, cells, lam) -> np.ndarray:
    return np.matmul(lam, mesh.vertices[mesh.cells[cells]])


def sample_field(fld, mesh: SimplicialMesh, cells, lam, shape=()) -> np.ndarray:
    """Values of a coefficient field at barycentric points ``lam`` of ``cells``."""
    fld = as_field(fld, shape=shape)
    if fld is None:
        return np.zeros(lam.shape[:2] + tuple(shape))
    if isinstance(fld, CoefficientField) and fld.kind == "cell":
        return np.broadcast_to(fld.value[cells][:, None], lam.shape[:2] + fld.shape)
    if isinstance(fld, CoefficientField) and fld.kind == "constant":
        return np.broadcast_to(fld.value, lam.shape[:2] + fld.shape)
    X = ball_points(mesh, cells, lam)
    return np.asarray(fld.value(X.reshape(-1, mesh.n)), dtype=float).reshape(lam.shape[:2] + fld.shape)


# ----------------------------------------------------------------------
# Norms of data
# ----------------------------------------------------------------------
def positive_field(fld):
    """``max(f, 0)`` of a scalar coefficient field."""
    fld = as_field(fld)
    if fld is None or isinstance(fld, FeFunction):
        return fld
    if fld.kind == "analytic":
        fn = fld.value
        return CoefficientField.analytic(lambda X: np.maximum(np.asarray(fn(X), dtype=float), 0.0), (), fld.role)
    return CoefficientField(fld.kind, np.maximum(fld.value, 0.0), fld.shape, fld.role)


def data_lp(spec: ProblemSpec, name: str, p: float, positive: bool = False) -> float:
    """``||f||_p``, ``||F||_p`` or ``||g||_{L^p(Gamma)}`` (optionally of the positive part)."""
    val = getattr(spec, name)
    if val is None or (isinstance(val, CoefficientField) and val.is_zero):
        return 0.0
    mesh = spec.mesh
    if isinstance(val, FeFunction):
        from ..fe import lp_norm
        return lp_norm(val, p, positive=positive)
    fld = positive_field(val) if positive else val
    if name == "g":
        return field_lp_norm(mesh, fld, p, region=("facets", spec.gamma_facets()), order=8)
    return field_lp_norm(mesh, fld, p, order=8)


def cell_average_field(fld, mesh: SimplicialMesh, shape=()) -> np.ndarray:
    fld = as_field(fld, shape=shape)
    if fld is None:
        return np.zeros((mesh.n_cells,) + tuple(shape))
    if isinstance(fld, FeFunction):
        return fld.cell_values().mean(axis=1)
    return np.asarray(fld.cell_average(mesh, 6))


def data_lorentz(spec: ProblemSpec, name: str, p: float, q: float, positive: bool = False,
                 cells=None) -> float:
    """Lorentz norm of cell (or facet) averages of a datum.

    Coefficient data are replaced by their cell averages (facet averages for
    ``g``) so the exact P0 rearrangement applies.
    """
    val = getattr(spec, name)
    if val is None or (isinstance(val, CoefficientField) and val.is_zero):
        return 0.0
    mesh = spec.mesh
    if name == "g":
        idx = spec.gamma_facets()
        frule = simplex_rule(mesh.n - 1, 6)
        gq = np.asarray(_values_at(as_field(val), mesh, frule, "facets", idx), dtype=float)
        avg = gq @ frule.weights * math.factorial(mesh.n - 1)
        if positive:
            avg = np.maximum(avg, 0.0)
        return lorentz_norm((np.abs(avg), mesh.facet_areas[idx]), (p, q))
    shape = (mesh.n,) if name == "F" else ()
    avg = cell_average_field(val, mesh, shape)
    if positive:
        avg = np.maximum(avg, 0.0)
    mag = np.abs(avg) if avg.ndim == 1 else np.linalg.norm(avg, axis=1)
    vol = mesh.volumes
    if cells is not None:
        mag, vol = mag[cells], vol[cells]
    return lorentz_norm((mag, vol), (p, q))


def positive_integral(u: FeFunction, cells=None) -> float:
    """``int u+`` exactly."""
    mesh = u.mesh
    idx = slice(None) if cells is None else cells
    return float(power_integrals(u.cell_values()[idx], mesh.volumes[idx], 1.0, positive=True).sum())


def positive_fraction(u: FeFunction) -> np.ndarray:
    """Per-cell fraction of ``{u > 0}`` (exact slicing)."""
    from ..levelset import cell_cdf

    V = np.sort(u.cell_values(), axis=1)
    return 1.0 - cell_cdf(V, np.zeros(len(V)))


def gradient_energy_positive(u: FeFunction) -> float:
    """``int |grad u+|^2`` exactly: ``|grad u|^2`` times ``|{u > 0} cap T|``."""
    g2 = np.sum(u.gradients() ** 2, axis=1)
    return float(np.sum(g2 * positive_fraction(u) * u.mesh.volumes))


__all__ = [
    "averaging_operator", "random_family", "ball_rule", "ball_points", "sample_field", "positive_field",
    "data_lp", "data_lorentz", "cell_average_field", "positive_integral", "positive_fraction",
    "gradient_energy_positive",
]
