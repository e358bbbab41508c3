import json

import numpy as np
import pytest

from neumannlab.config import ConfigError, build_mesh, load_config, make_coefficients, parse_config
from neumannlab.experiments import REGISTRY
from neumannlab.mesh import unit_cube


def test_minimal_defaults():
    cfg = parse_config({"experiments": ["kernel-dim-cube"]}, REGISTRY)
    assert cfg.seed == 0 and cfg.output == "runs"
    assert cfg.experiments[0].name == "kernel-dim-cube"


def test_digest_ignores_output_only():
    a = parse_config({"experiments": ["splitting"], "output": "a"})
    b = parse_config({"experiments": ["splitting"], "output": "b"})
    c = parse_config({"experiments": ["splitting"], "seed": 1})
    assert a.digest() == b.digest() != c.digest()


def test_round_trip():
    doc = {"experiments": [{"name": "poincare", "params": {"samples": 50}, "tolerances": {"stability": 0.3}}],
           "mesh": {"builder": "unit_cube", "n": 3, "k": 4},
           "coefficients": {"d": {"kind": "constant", "value": 1.0}}, "refinements": [2, 4]}
    cfg = parse_config(doc, REGISTRY)
    again = parse_config(json.loads(cfg.to_json()), REGISTRY)
    assert again.to_dict() == cfg.to_dict()
    assert cfg.problem_inputs()["levels"] == [2, 4]


@pytest.mark.parametrize("doc, path", [
    ([], ""),
    ({"experiments": []}, "experiments"),
    ({"experiments": ["nope"]}, "experiments[0].name"),
    ({"experiments": [{"name": "splitting", "params": {"zz": 1}}]}, "experiments[0].params.zz"),
    ({"experiments": [{"name": "splitting", "tolerances": {"budget": -1}}]}, "experiments[0].tolerances.budget"),
    ({"experiments": ["splitting"], "seed": -1}, "seed"),
    ({"experiments": ["splitting"], "extra": 1}, "extra"),
    ({"experiments": ["splitting"], "schema_version": 7}, "schema_version"),
    ({"experiments": ["splitting"], "mesh": {"builder": "torus"}}, "mesh.builder"),
    ({"experiments": ["splitting"], "mesh": {"builder": "unit_cube", "k": 0}}, "mesh.k"),
    ({"experiments": ["splitting"], "coefficients": {"q": {"kind": "constant", "value": 1}}}, "coefficients.q"),
    ({"experiments": ["splitting"], "coefficients": {"b": {"kind": "constant", "value": 1}}}, "coefficients.b.value"),
    ({"experiments": ["splitting"], "coefficients": {"d": {"kind": "expr", "value": "os.system"}}},
     "coefficients.d.value"),
    ({"experiments": ["splitting"], "coefficients": {"d": {"kind": "per_facet", "value": [1]}}}, "coefficients.d.kind"),
    ({"experiments": ["splitting"], "refinements": [0]}, "refinements"),
])
def test_errors_carry_path(doc, path):
    with pytest.raises(ConfigError) as info:
        parse_config(doc, REGISTRY)
    assert info.value.path == path


def test_syntax_error_location(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text('{"experiments": [\n  "a",\n]}')
    with pytest.raises(ConfigError, match="line 3"):
        load_config(p)


def test_builders():
    assert build_mesh({"builder": "box", "lower": [0, 0], "upper": [2, 1], "subdivisions": [2, 1]}).volume \
        == pytest.approx(2.0)
    assert build_mesh({"builder": "unit_cube", "n": 2, "k": 3}, level=5).n_vertices == 36
    assert build_mesh({"builder": "half_ball", "n": 3, "k": 2}).n == 3


def test_coefficient_kinds():
    mesh = unit_cube(3, 2)
    nf = len(mesh.boundary_facets)
    co = make_coefficients({
        "A": {"kind": "constant", "value": np.eye(3).tolist()},
        "b": {"kind": "expr", "value": ["x1", "0", "-x3"]},
        "d": {"kind": "per_cell", "value": [1.0] * mesh.n_cells},
        "g": {"kind": "per_facet", "value": [0.5] * nf},
    }, mesh)
    assert set(co) == {"A", "b", "d", "g"}
    with pytest.raises(ConfigError):
        make_coefficients({"d": {"kind": "per_cell", "value": [1.0, 2.0]}}, mesh)
