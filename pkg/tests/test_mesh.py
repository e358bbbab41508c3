import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from neumannlab.mesh import (MeshError, SimplicialMesh, build_box_mesh, build_graph_domain_mesh,
                             build_half_ball_mesh, dilate_mesh, flat_graph, linear_graph, measured_slope,
                             reflect_mesh, unit_cube, verify_mesh)


@given(st.lists(st.floats(0.2, 3.0), min_size=3, max_size=3), st.lists(st.integers(1, 4), min_size=3, max_size=3))
def test_box_volume_and_closure(lengths, subs):
    mesh = build_box_mesh([0.0] * 3, lengths, subs)
    assert mesh.n_cells == 6 * math.prod(subs)
    assert np.isclose(mesh.volume, math.prod(lengths), rtol=1e-13)
    diag = verify_mesh(mesh)
    assert diag.ok
    assert diag.closure_error < 1e-12
    area = 2 * (lengths[0] * lengths[1] + lengths[1] * lengths[2] + lengths[0] * lengths[2])
    assert np.isclose(mesh.boundary_area, area, rtol=1e-13)


@pytest.mark.parametrize("n", [2, 3])
def test_unit_cube_counts(n):
    mesh = unit_cube(n, 4)
    assert mesh.n_vertices == 5 ** n
    assert mesh.n_cells == math.factorial(n) * 4 ** n
    assert np.all(mesh.volumes > 0)


def test_digest_stable_and_sensitive():
    a, b = unit_cube(3, 3), unit_cube(3, 3)
    assert a.digest == b.digest
    assert a.digest != unit_cube(3, 4).digest


def test_json_round_trip():
    mesh = unit_cube(3, 2)
    back = SimplicialMesh.from_json(mesh.to_json())
    assert back.digest == mesh.digest
    assert np.array_equal(back.cells, mesh.cells)


@given(st.floats(0.1, 10.0))
def test_dilation_scales_measures(r):
    mesh = unit_cube(3, 2)
    big = dilate_mesh(mesh, r)
    assert np.isclose(big.volume, r ** 3, rtol=1e-12)
    assert np.isclose(big.boundary_area, 6 * r ** 2, rtol=1e-12)


def test_half_ball_volume_converges():
    exact = 2 * math.pi / 3 * math.exp(-3)
    errs = [abs(build_half_ball_mesh(3, k).volume - exact) for k in (2, 4, 8)]
    assert errs[2] < errs[1] < errs[0]
    assert errs[2] / exact < 0.02
    mesh = build_half_ball_mesh(3, 3)
    assert verify_mesh(mesh).ok
    assert len(mesh.facets_tagged("flat")) and len(mesh.facets_tagged("round"))


def test_graph_mesh_slope_and_reflection():
    mesh = build_graph_domain_mesh(linear_graph([0.3, 0.0]), 3)
    assert verify_mesh(mesh).ok
    assert measured_slope(mesh) == pytest.approx(0.3, rel=1e-12)
    ref = reflect_mesh(mesh)
    assert verify_mesh(ref).ok
    assert ref.volume == pytest.approx(2 * mesh.volume, rel=1e-12)


def test_flat_graph_is_a_box():
    mesh = build_graph_domain_mesh(flat_graph(3, r=1.0), 2)
    assert mesh.volume == pytest.approx(4.0, rel=1e-12)


def test_bad_mesh_rejected():
    with pytest.raises((MeshError, ValueError)):
        build_box_mesh([0, 0, 0], [1, 1, 1], [0, 1, 1])
