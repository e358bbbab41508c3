"""Conforming simplicial meshes for boxes and special Lipschitz graph domains.

Meshes are immutable once built.  Derived geometry (cell volumes, barycentric
gradients, boundary facets and their outward normals) is computed on first
access and cached.

The two constructors are

* :func:`build_box_mesh` -- Kuhn triangulation of an axis-aligned box, and
* :func:`build_graph_domain_mesh` -- the region above the graph of a
  piecewise-linear ``psi`` over a square or polygonal-disk base, extruded in
  layers and split into simplices with a staircase rule so that the map
  ``(x', t) -> (x', psi(x') + t H)`` is affine on every cell.

:func:`reflect_mesh` glues the mirror image ``(x', 2 psi(x') - x_n)`` onto a
graph mesh and records the vertex pairing, which makes reflected functions and
coefficients exact (cells map to cells).
"""
from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Callable

import numpy as np

MESH_FORMAT_VERSION = 1


class MeshError(ValueError):
    """Raised when a mesh violates a structural invariant."""


@dataclass(frozen=True)
class LipschitzCharacter:
    """Lipschitz constant ``M``, cover count ``N`` and cover radius ``r0``."""

    M: float
    N: int | None = None
    r0: float | None = None

    def as_dict(self) -> dict:
        return {"M": self.M, "N": self.N, "r0": self.r0}


@dataclass(frozen=True)
class GraphInfo:
    """Provenance of a mesh built over the graph of ``psi``.

    ``base_index[v]`` and ``layer[v]`` locate vertex ``v`` in the extrusion;
    ``psi_values[v]`` is ``psi`` at its base point.  Layer 0 is the graph.
    """

    spec: "GraphDomainSpec"
    base_index: np.ndarray
    layer: np.ndarray
    psi_values: np.ndarray
    layers: int
    cell_base: np.ndarray
    base_grad: np.ndarray


@dataclass(frozen=True)
class ReflectionInfo:
    """Vertex and cell pairing produced by :func:`reflect_mesh`.

    ``partner[v]`` is the index of ``Psi(x_v)``; vertices on the graph are
    their own partner.  Cells ``[0, n_source)`` are the originals and cell
    ``n_source + k`` is the image of cell ``k``.
    """

    graph: GraphInfo
    partner: np.ndarray
    n_source_vertices: int
    n_source_cells: int
    jacobians: np.ndarray  # DPsi per source cell, shape (n_source_cells, n, n)


class SimplicialMesh:
    """Conforming simplicial mesh of a polyhedral domain in ``R^n``.

    Parameters
    ----------
    vertices : (nv, n) array
    cells : (nc, n+1) integer array, positively oriented
    boundary : (nf, n) integer array, optional
        Boundary facets.  Computed from the cells when omitted; validated
        against the cells otherwise.
    character : LipschitzCharacter, optional
    tags : dict mapping a name to boundary-facet indices, optional
    """

    def __init__(self, vertices, cells, boundary=None, character=None,
                 tags=None, graph: GraphInfo | None = None,
                 reflection: ReflectionInfo | None = None, validate=True):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.cells = np.ascontiguousarray(cells, dtype=np.int64)
        if self.vertices.ndim != 2 or self.cells.ndim != 2:
            raise MeshError("vertices and cells must be 2-d arrays")
        self.n = self.vertices.shape[1]
        if self.cells.shape[1] != self.n + 1:
            raise MeshError(f"cells need {self.n + 1} vertices, got {self.cells.shape[1]}")
        if self.cells.size and (self.cells.min() < 0 or self.cells.max() >= len(self.vertices)):
            raise MeshError("cell refers to a missing vertex")
        self.character = character
        self.graph = graph
        self.reflection = reflection
        self.vertices.setflags(write=False)
        self.cells.setflags(write=False)
        self._given_boundary = None if boundary is None else np.asarray(boundary, dtype=np.int64)
        self._tags = {k: np.asarray(v, dtype=np.int64) for k, v in (tags or {}).items()}
        if validate:
            self._validate()

    # -- basic counts -------------------------------------------------
    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    # -- cell geometry ------------------------------------------------
    @cached_property
    def _jacobians(self) -> np.ndarray:
        X = self.vertices[self.cells]
        return np.transpose(X[:, 1:, :] - X[:, :1, :], (0, 2, 1))

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        return np.linalg.det(self._jacobians) / math.factorial(self.n)

    @cached_property
    def volumes(self) -> np.ndarray:
        return np.abs(self.signed_volumes)

    @cached_property
    def volume(self) -> float:
        return float(math.fsum(self.volumes))

    @cached_property
    def barycentric_gradients(self) -> np.ndarray:
        """Gradients of the barycentric coordinates, shape (nc, n+1, n)."""
        inv = np.linalg.inv(self._jacobians)  # rows are grad lambda_1..n
        g0 = -inv.sum(axis=1, keepdims=True)
        return np.concatenate([g0, inv], axis=1)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.cells].mean(axis=1)

    @cached_property
    def cell_diameters(self) -> np.ndarray:
        X = self.vertices[self.cells]
        d = 0.0
        for i, j in itertools.combinations(range(self.n + 1), 2):
            d = np.maximum(d, np.linalg.norm(X[:, i] - X[:, j], axis=1))
        return d

    @cached_property
    def mesh_size(self) -> float:
        return float(self.cell_diameters.max())

    # -- facets -------------------------------------------------------
    @cached_property
    def _faces(self):
        n1 = self.n + 1
        local = np.array([[j for j in range(n1) if j != i] for i in range(n1)])
        faces = self.cells[:, local].reshape(-1, self.n)
        key = np.sort(faces, axis=1)
        uniq, inverse, counts = np.unique(key, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.reshape(-1)
        return faces, uniq, inverse, counts

    @cached_property
    def _boundary_data(self):
        faces, uniq, inverse, counts = self._faces
        once = counts[inverse] == 1
        idx = np.nonzero(once)[0]
        owner = idx // (self.n + 1)
        opposite = idx % (self.n + 1)
        facets = faces[idx]
        if self._given_boundary is not None:
            given = np.sort(self._given_boundary, axis=1)
            found = np.sort(facets, axis=1)
            order_found = np.lexsort(found.T[::-1])
            order_given = np.lexsort(given.T[::-1])
            if given.shape != found.shape or not np.array_equal(found[order_found], given[order_given]):
                raise MeshError("declared boundary facets differ from the cell-derived boundary")
            perm = np.empty_like(order_found)
            perm[order_given] = order_found  # given[k] corresponds to found[perm[k]]
            owner, opposite = owner[perm], opposite[perm]
            facets = self._given_boundary
        return facets, owner, opposite

    @property
    def boundary_facets(self) -> np.ndarray:
        return self._boundary_data[0]

    @property
    def facet_owner(self) -> np.ndarray:
        return self._boundary_data[1]

    @cached_property
    def _facet_geometry(self):
        facets, owner, _ = self._boundary_data
        P = self.vertices[facets]  # (nf, n, n)
        E = P[:, 1:, :] - P[:, :1, :]  # (nf, n-1, n)
        n = self.n
        normal = np.empty((len(facets), n))
        for k in range(n):
            minor = np.delete(E, k, axis=2)
            normal[:, k] = (-1) ** k * (np.linalg.det(minor) if n > 1 else 1.0)
        length = np.linalg.norm(normal, axis=1)
        area = length / math.factorial(n - 1)
        unit = normal / length[:, None]
        outward = P.mean(axis=1) - self.centroids[owner]
        flip = np.einsum("ij,ij->i", unit, outward) < 0
        unit[flip] *= -1
        return unit, area

    @property
    def facet_normals(self) -> np.ndarray:
        return self._facet_geometry[0]

    @property
    def facet_areas(self) -> np.ndarray:
        return self._facet_geometry[1]

    @cached_property
    def boundary_area(self) -> float:
        return float(math.fsum(self.facet_areas))

    @cached_property
    def boundary_vertices(self) -> np.ndarray:
        return np.unique(self.boundary_facets)

    def tags(self) -> dict[str, np.ndarray]:
        return dict(self._tags)

    def facets_tagged(self, name: str) -> np.ndarray:
        if name in ("all", "boundary"):
            return np.arange(len(self.boundary_facets))
        if name not in self._tags:
            raise KeyError(f"no boundary tag {name!r}; known: {sorted(self._tags)}")
        return self._tags[name]

    # -- identity -----------------------------------------------------
    @cached_property
    def digest(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.vertices).tobytes())
        h.update(np.ascontiguousarray(self.cells).tobytes())
        return h.hexdigest()[:16]

    # -- validation ---------------------------------------------------
    def _validate(self):
        if not np.all(np.isfinite(self.vertices)):
            raise MeshError("non-finite vertex coordinates")
        if self.n_cells == 0:
            raise MeshError("mesh has no cells")
        vol = self.signed_volumes
        if np.any(vol <= 0):
            bad = int(np.argmin(vol))
            raise MeshError(f"cell {bad} has non-positive signed volume {vol[bad]:.3e}")
        counts = self._faces[3]
        if np.any(counts > 2):
            raise MeshError("a face is shared by more than two cells (non-conforming)")
        self._boundary_data  # noqa: B018  (raises on mismatch)

    def __repr__(self) -> str:
        return f"SimplicialMesh(n={self.n}, vertices={self.n_vertices}, cells={self.n_cells})"

    # -- serialization ------------------------------------------------
    def to_dict(self) -> dict:
        ch = self.character.as_dict() if self.character else None
        return {
            "version": MESH_FORMAT_VERSION,
            "n": self.n,
            "vertices": self.vertices.tolist(),
            "cells": self.cells.tolist(),
            "boundary": np.asarray(self.boundary_facets).tolist(),
            "character": ch,
            "tags": {k: v.tolist() for k, v in sorted(self._tags.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, doc: dict) -> "SimplicialMesh":
        if doc.get("version") != MESH_FORMAT_VERSION:
            raise MeshError(f"unsupported mesh format version {doc.get('version')!r}")
        vertices = np.asarray(doc["vertices"], dtype=float)
        if vertices.ndim != 2 or vertices.shape[1] != doc["n"]:
            raise MeshError("vertex array does not match declared dimension n")
        ch = doc.get("character")
        character = LipschitzCharacter(**ch) if ch else None
        return cls(vertices, doc["cells"], boundary=doc.get("boundary"),
                   character=character, tags=doc.get("tags"))

    @classmethod
    def from_json(cls, text: str) -> "SimplicialMesh":
        return cls.from_dict(json.loads(text))


# ----------------------------------------------------------------------
# Kuhn triangulations
# ----------------------------------------------------------------------
def _orient(vertices: np.ndarray, cells: np.ndarray) -> np.ndarray:
    X = vertices[cells]
    J = X[:, 1:, :] - X[:, :1, :]
    neg = np.linalg.det(J) < 0
    cells = cells.copy()
    cells[neg, -2], cells[neg, -1] = cells[neg, -1], cells[neg, -2].copy()
    return cells


def _kuhn_cells(shape: tuple[int, ...]) -> np.ndarray:
    """Kuhn simplices of a grid with ``shape[k]`` intervals along axis k."""
    n = len(shape)
    npts = tuple(s + 1 for s in shape)
    corners = np.stack(np.meshgrid(*[np.arange(s) for s in shape], indexing="ij"), -1).reshape(-1, n)
    cells = []
    for perm in itertools.permutations(range(n)):
        path = [corners.copy()]
        cur = corners.copy()
        for axis in perm:
            cur = cur.copy()
            cur[:, axis] += 1
            path.append(cur)
        idx = [np.ravel_multi_index(tuple(p.T), npts) for p in path]
        cells.append(np.stack(idx, axis=1))
    # group all permutations of one cube together for locality
    return np.stack(cells, axis=1).reshape(-1, n + 1)


def _grid_vertices(lower, upper, shape) -> np.ndarray:
    axes = [np.linspace(lo, hi, s + 1) for lo, hi, s in zip(lower, upper, shape)]
    for ax, hi in zip(axes, upper):
        ax[-1] = hi
    return np.stack(np.meshgrid(*axes, indexing="ij"), -1).reshape(-1, len(shape))


def build_box_mesh(lower, upper, subdivisions) -> SimplicialMesh:
    """Kuhn triangulation of the box ``prod [lower_k, upper_k]``.

    Boundary facets are tagged ``x{k}-`` / ``x{k}+`` (1-based axis number).

    Examples
    --------
    >>> build_box_mesh([0, 0, 0], [1, 1, 1], [1, 1, 1]).n_cells
    6
    """
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    subdivisions = tuple(int(s) for s in np.broadcast_to(subdivisions, lower.shape))
    if lower.shape != upper.shape or lower.ndim != 1 or len(lower) < 1:
        raise MeshError("box corners must be 1-d arrays of equal length")
    if np.any(upper - lower <= 0) or not np.all(np.isfinite(upper - lower)):
        raise MeshError(f"degenerate box: lower={lower.tolist()} upper={upper.tolist()}")
    if min(subdivisions) < 1:
        raise MeshError(f"subdivisions must be >= 1, got {subdivisions}")
    vertices = _grid_vertices(lower, upper, subdivisions)
    cells = _orient(vertices, _kuhn_cells(subdivisions))
    mesh = SimplicialMesh(vertices, cells, validate=False)
    facets = mesh.boundary_facets
    X = vertices[facets]
    tags = {}
    for k in range(len(lower)):
        tags[f"x{k + 1}-"] = np.nonzero(np.all(X[:, :, k] == lower[k], axis=1))[0]
        tags[f"x{k + 1}+"] = np.nonzero(np.all(X[:, :, k] == upper[k], axis=1))[0]
    n = len(lower)
    character = LipschitzCharacter(M=1.0, N=2 ** n, r0=float(np.min(upper - lower)) / 2)
    out = SimplicialMesh(vertices, cells, boundary=facets, character=character, tags=tags)
    return out


def unit_cube(n: int = 3, k: int = 8) -> SimplicialMesh:
    """Uniform Kuhn mesh of ``(0,1)^n`` with ``k`` intervals per axis."""
    return build_box_mesh(np.zeros(n), np.ones(n), [k] * n)


# ----------------------------------------------------------------------
# Special Lipschitz graph domains
# ----------------------------------------------------------------------
@dataclass(frozen=True)
class GraphDomainSpec:
    """Domain ``{|x'| < r, psi(x') < x_n < psi(x') + (M+1) r}``.

    ``psi`` maps an ``(m, n-1)`` array of base points to ``m`` heights and is
    sampled at base vertices; the mesh uses its piecewise-linear interpolant.
    ``base`` is ``"square"`` (exact, default) or ``"disk"`` (regular polygon,
    ``n = 3`` only).
    """

    n: int
    r: float
    psi: Callable[[np.ndarray], np.ndarray]
    M: float
    base: str = "square"
    segments: int = 64

    @property
    def height(self) -> float:
        return (self.M + 1.0) * self.r


def flat_graph(n: int = 3, r: float = 1.0, **kw) -> GraphDomainSpec:
    return GraphDomainSpec(n=n, r=r, psi=lambda x: np.zeros(len(x)), M=0.0, **kw)


def linear_graph(slope, n: int = 3, r: float = 1.0, **kw) -> GraphDomainSpec:
    """``psi(x') = slope . x'`` with ``M = |slope|``."""
    slope = np.asarray(slope, dtype=float)
    return GraphDomainSpec(n=n, r=r, psi=lambda x: np.asarray(x) @ slope,
                           M=float(np.linalg.norm(slope)), **kw)


def _disk_base(r: float, segments: int, rings: int):
    angles = 2 * np.pi * np.arange(segments) / segments
    pts = [np.zeros((1, 2))]
    for k in range(1, rings + 1):
        rho = r * k / rings
        pts.append(np.stack([rho * np.cos(angles), rho * np.sin(angles)], axis=1))
    pts = np.concatenate(pts)
    tris = []
    ring_start = lambda k: 1 + (k - 1) * segments  # noqa: E731
    for s in range(segments):
        tris.append([0, ring_start(1) + s, ring_start(1) + (s + 1) % segments])
    for k in range(1, rings):
        a, b = ring_start(k), ring_start(k + 1)
        for s in range(segments):
            s1 = (s + 1) % segments
            tris.append([a + s, b + s, b + s1])
            tris.append([a + s, b + s1, a + s1])
    return pts, np.asarray(tris, dtype=np.int64)


def _base_triangulation(spec: GraphDomainSpec, resolution: int):
    d = spec.n - 1
    if spec.base == "square":
        pts = _grid_vertices(-spec.r * np.ones(d), spec.r * np.ones(d), (resolution,) * d)
        tris = _kuhn_cells((resolution,) * d)
    elif spec.base == "disk":
        if d != 2:
            raise MeshError("polygonal-disk base is only available for n = 3")
        pts, tris = _disk_base(spec.r, spec.segments, resolution)
    else:
        raise MeshError(f"unknown base shape {spec.base!r}")
    return pts, tris


def _simplex_gradients(points: np.ndarray, simplices: np.ndarray, values: np.ndarray):
    X = points[simplices]
    J = X[:, 1:, :] - X[:, :1, :]
    dv = values[simplices[:, 1:]] - values[simplices[:, :1]]
    return np.linalg.solve(J, dv[..., None])[..., 0]


def build_graph_domain_mesh(spec: GraphDomainSpec, resolution: int,
                            layers: int | None = None) -> SimplicialMesh:
    """Mesh of the special Lipschitz domain above ``psi``.

    ``resolution`` is the base subdivision count per axis (square base) or
    the number of rings (disk base).  Bottom facets are tagged ``"bottom"``.
    """
    if resolution < 1:
        raise MeshError("resolution must be >= 1")
    n = spec.n
    base_pts, base_tris = _base_triangulation(spec, resolution)
    psi0 = float(np.asarray(spec.psi(np.zeros((1, n - 1))))[0])
    if psi0 != 0.0:
        raise MeshError(f"psi(0) must be exactly 0, got {psi0!r}")
    psi = np.asarray(spec.psi(base_pts), dtype=float)
    if psi.shape != (len(base_pts),) or not np.all(np.isfinite(psi)):
        raise MeshError("psi must return one finite height per base point")
    base_tris = np.sort(base_tris, axis=1)
    grad = _simplex_gradients(base_pts, base_tris, psi)
    slope = float(np.max(np.linalg.norm(grad, axis=1)))
    if slope > spec.M + 1e-12:
        raise MeshError(f"psi has slope {slope:.15g} exceeding declared M = {spec.M}")

    L = int(layers or resolution)
    nb = len(base_pts)
    H = spec.height
    t = np.arange(L + 1) / L
    vertices = np.concatenate([
        np.column_stack([base_pts, psi + tk * H]) for tk in t
    ])
    base_index = np.tile(np.arange(nb), L + 1)
    layer = np.repeat(np.arange(L + 1), nb)

    cells, cell_base = [], []
    for k in range(L):
        lo, hi = k * nb, (k + 1) * nb
        for i in range(n):
            c = np.concatenate([base_tris[:, : i + 1] + lo, base_tris[:, i:] + hi], axis=1)
            cells.append(c)
            cell_base.append(np.arange(len(base_tris)))
    cells = np.concatenate(cells)
    cell_base = np.concatenate(cell_base)
    cells = _orient(vertices, cells)

    mesh = SimplicialMesh(vertices, cells, validate=False)
    facets = mesh.boundary_facets
    flay = layer[facets]
    tags = {
        "bottom": np.nonzero(np.all(flay == 0, axis=1))[0],
        "top": np.nonzero(np.all(flay == L, axis=1))[0],
    }
    tags["lateral"] = np.setdiff1d(np.arange(len(facets)), np.concatenate([tags["bottom"], tags["top"]]))
    info = GraphInfo(spec=spec, base_index=base_index, layer=layer,
                     psi_values=psi[base_index], layers=L, cell_base=cell_base, base_grad=grad)
    return SimplicialMesh(vertices, cells, boundary=facets,
                          character=LipschitzCharacter(M=spec.M, N=1, r0=spec.r),
                          tags=tags, graph=info)


def measured_slope(mesh: SimplicialMesh) -> float:
    """Max slope of the piecewise-linear graph underlying a graph mesh."""
    if mesh.graph is None:
        raise MeshError("mesh was not built over a graph")
    return float(np.max(np.linalg.norm(mesh.graph.base_grad, axis=1)))


# ----------------------------------------------------------------------
# Reflection and dilation
# ----------------------------------------------------------------------
def reflection_jacobian(base_grad: np.ndarray) -> np.ndarray:
    """``DPsi`` for ``Psi(x', x_n) = (x', 2 psi(x') - x_n)``, per base simplex."""
    m, d = base_grad.shape
    n = d + 1
    D = np.zeros((m, n, n))
    D[:, :d, :d] = np.eye(d)
    D[:, d, :d] = 2 * base_grad
    D[:, d, d] = -1.0
    return D


def reflect_points(points: np.ndarray, psi_values: np.ndarray) -> np.ndarray:
    out = np.array(points, dtype=float, copy=True)
    out[:, -1] = 2 * psi_values - out[:, -1]
    return out


def reflect_mesh(mesh: SimplicialMesh) -> SimplicialMesh:
    """Union of a graph mesh and its mirror image across the graph."""
    g = mesh.graph
    if g is None:
        raise MeshError("reflect_mesh needs a mesh from build_graph_domain_mesh")
    on_graph = g.layer == 0
    nv = mesh.n_vertices
    mirror = np.nonzero(~on_graph)[0]
    partner = np.arange(nv + len(mirror))
    new_index = np.arange(nv)
    new_index[mirror] = nv + np.arange(len(mirror))
    partner[:nv] = new_index
    partner[nv:] = mirror
    mirrored = reflect_points(mesh.vertices[mirror], g.psi_values[mirror])
    vertices = np.concatenate([mesh.vertices, mirrored])
    rcells = new_index[mesh.cells]
    rcells[:, [-2, -1]] = rcells[:, [-1, -2]]
    cells = np.concatenate([mesh.cells, rcells])

    layer = np.concatenate([g.layer, -g.layer[mirror]])
    tmp = SimplicialMesh(vertices, cells, validate=False)
    facets = tmp.boundary_facets
    flay = layer[facets]
    L = g.layers
    tags = {
        "top": np.nonzero(np.all(flay == L, axis=1))[0],
        "reflected_top": np.nonzero(np.all(flay == -L, axis=1))[0],
    }
    tags["lateral"] = np.setdiff1d(np.arange(len(facets)),
                                   np.concatenate([tags["top"], tags["reflected_top"]]))
    info = ReflectionInfo(graph=g, partner=partner, n_source_vertices=nv,
                          n_source_cells=mesh.n_cells,
                          jacobians=reflection_jacobian(g.base_grad)[g.cell_base])
    return SimplicialMesh(vertices, cells, boundary=facets, character=mesh.character,
                          tags=tags, reflection=info)


def dilate_mesh(mesh: SimplicialMesh, r: float) -> SimplicialMesh:
    """Scale all coordinates by ``r``; ``M`` and ``N`` are unchanged."""
    if not (r > 0 and math.isfinite(r)):
        raise MeshError(f"dilation factor must be positive, got {r!r}")
    ch = mesh.character
    if ch is not None:
        ch = replace(ch, r0=None if ch.r0 is None else ch.r0 * r)
    graph = mesh.graph
    if graph is not None:
        spec = graph.spec
        scaled = GraphDomainSpec(n=spec.n, r=spec.r * r, M=spec.M, base=spec.base,
                                 segments=spec.segments,
                                 psi=lambda x, _p=spec.psi, _r=r: _r * np.asarray(_p(np.asarray(x) / _r)))
        graph = replace(graph, spec=scaled, psi_values=graph.psi_values * r)
    return SimplicialMesh(mesh.vertices * r, mesh.cells, boundary=mesh.boundary_facets,
                          character=ch, tags=mesh.tags(), graph=graph, validate=False)


def build_half_ball_mesh(n: int = 3, k: int = 4, radius: float = math.exp(-1)) -> SimplicialMesh:
    """Mesh of ``{|x| < radius, x_n > 0}``.

    The box ``[-1, 1]^{n-1} x [0, 1]`` is Kuhn-triangulated and mapped by
    ``x -> radius * x ||x||_inf / ||x||_2``, which sends each cube shell
    ``||x||_inf = t`` onto the sphere of radius ``t * radius``.  Facets on
    ``x_n = 0`` are tagged ``"flat"``, the rest ``"round"``.
    """
    if n < 2:
        raise MeshError("half ball needs n >= 2")
    box = build_box_mesh([-1.0] * (n - 1) + [0.0], [1.0] * n, [2 * k] * (n - 1) + [k])
    X = np.array(box.vertices)
    r2 = np.linalg.norm(X, axis=1)
    rinf = np.max(np.abs(X), axis=1)
    scale = np.divide(rinf, r2, out=np.zeros_like(r2), where=r2 > 0)
    V = radius * X * scale[:, None]
    cells = _orient(V, np.array(box.cells))
    facets = box.boundary_facets
    flat = np.nonzero(np.all(X[facets][:, :, -1] == 0.0, axis=1))[0]
    round_ = np.setdiff1d(np.arange(len(facets)), flat)
    return SimplicialMesh(V, cells, boundary=facets, tags={"flat": flat, "round": round_},
                          character=LipschitzCharacter(M=1.0, N=2 ** n, r0=radius / 4))


# ----------------------------------------------------------------------
# Diagnostics
# ----------------------------------------------------------------------
@dataclass
class MeshDiagnostics:
    conforming: bool
    oriented: bool
    negative_cells: list = field(default_factory=list)
    min_quality: float = 0.0
    closure: np.ndarray | None = None
    closure_error: float = 0.0
    normal_error: float = 0.0
    outward: bool = True
    volume: float = 0.0

    @property
    def ok(self) -> bool:
        return self.conforming and self.oriented and self.outward


def verify_mesh(mesh: SimplicialMesh) -> MeshDiagnostics:
    """Report conformity, orientation, quality and boundary closure."""
    n = mesh.n
    vol = mesh.signed_volumes
    _, _, _, counts = mesh._faces
    conforming = bool(np.all(counts <= 2))
    negative = np.nonzero(vol <= 0)[0].tolist()
    diag = mesh.cell_diameters
    regular = diag ** n / math.factorial(n) * math.sqrt((n + 1) / 2 ** n)
    quality = float(np.min(np.abs(vol) / regular))
    try:
        nu, area = mesh.facet_normals, mesh.facet_areas
        closure = (nu * area[:, None]).sum(axis=0)
        normal_err = float(np.max(np.abs(np.linalg.norm(nu, axis=1) - 1)))
        fc = mesh.vertices[mesh.boundary_facets].mean(axis=1)
        outward = bool(np.all(np.einsum("ij,ij->i", nu, fc - mesh.centroids[mesh.facet_owner]) > 0))
    except (MeshError, np.linalg.LinAlgError):
        closure, normal_err, outward = None, float("inf"), False
    return MeshDiagnostics(
        conforming=conforming, oriented=not negative, negative_cells=negative,
        min_quality=quality, closure=closure,
        closure_error=float("inf") if closure is None else float(np.max(np.abs(closure))),
        normal_error=normal_err, outward=outward, volume=float(np.sum(np.abs(vol))),
    )
