"""JSON run configurations: schema validation, mesh builders, coefficients.

A configuration is a JSON object::

    {
      "schema_version": 1,
      "seed": 0,
      "output": "runs",
      "mesh": {"builder": "unit_cube", "n": 3, "k": 8},
      "coefficients": {"d": {"kind": "constant", "value": 1.0},
                       "f": {"kind": "expr", "value": "cos(pi*x1)"}},
      "refinements": [4, 8],
      "experiments": ["kernel-dim-cube",
                      {"name": "poincare", "params": {"samples": 200},
                       "tolerances": {"stability": 0.2}}]
    }

Only ``experiments`` is required.  ``mesh``, ``coefficients`` and
``refinements`` are handed to the experiments that take a problem; all other
experiments have fixed geometry.  Every error carries the JSON path of the
offending field (and line/column for syntax errors).
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .expr import ExpressionError, compile_expression
from .fe import CoefficientField
from .mesh import (SimplicialMesh, build_box_mesh, build_graph_domain_mesh,
                   build_half_ball_mesh, linear_graph, unit_cube)

SCHEMA_VERSION = 1
TOP_KEYS = {"schema_version", "seed", "output", "mesh", "coefficients", "refinements", "experiments"}
ROLE_RANK = {"A": 2, "b": 1, "c": 1, "F": 1, "d": 0, "f": 0, "g": 0}
COEFF_KINDS = ("constant", "per_cell", "per_facet", "expr")
BUILDERS = {
    "unit_cube": ({"n", "k"}, "k"),
    "box": ({"lower", "upper", "subdivisions"}, "subdivisions"),
    "graph": ({"n", "slope", "r", "resolution", "base"}, "resolution"),
    "half_ball": ({"n", "k", "radius"}, "k"),
    "file": ({"path"}, None),
}


class ConfigError(ValueError):
    """Invalid configuration; ``path`` locates the field."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def _need(cond, path, msg):
    if not cond:
        raise ConfigError(path, msg)


def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _is_num(x) -> bool:
    return isinstance(x, (int, float)) and not isinstance(x, bool) and math.isfinite(x)


# ----------------------------------------------------------------------
# Meshes
# ----------------------------------------------------------------------
def validate_mesh_config(cfg, path="mesh") -> None:
    _need(isinstance(cfg, dict), path, "must be an object")
    builder = cfg.get("builder")
    _need(builder in BUILDERS, f"{path}.builder", f"unknown builder {builder!r}; expected one of {sorted(BUILDERS)}")
    allowed, _ = BUILDERS[builder]
    for key in cfg:
        _need(key == "builder" or key in allowed, f"{path}.{key}", f"unknown key for builder {builder!r}")
    if builder == "unit_cube":
        _need(_is_int(cfg.get("n", 3)) and cfg.get("n", 3) >= 2, f"{path}.n", "must be an integer >= 2")
        _need(_is_int(cfg.get("k", 8)) and cfg.get("k", 8) >= 1, f"{path}.k", "must be a positive integer")
    elif builder == "box":
        for key in ("lower", "upper"):
            v = cfg.get(key)
            _need(isinstance(v, list) and v and all(_is_num(x) for x in v), f"{path}.{key}", "must be a list of numbers")
        _need(len(cfg["lower"]) == len(cfg["upper"]), f"{path}.upper", "length differs from lower")
        sub = cfg.get("subdivisions", 8)
        ok = (_is_int(sub) and sub >= 1) or (isinstance(sub, list) and all(_is_int(x) and x >= 1 for x in sub)
                                              and len(sub) == len(cfg["lower"]))
        _need(ok, f"{path}.subdivisions", "must be a positive integer or one per axis")
    elif builder == "graph":
        _need(_is_int(cfg.get("n", 3)) and cfg.get("n", 3) >= 2, f"{path}.n", "must be an integer >= 2")
        slope = cfg.get("slope", 0.0)
        ok = _is_num(slope) or (isinstance(slope, list) and all(_is_num(x) for x in slope)
                                and len(slope) == cfg.get("n", 3) - 1)
        _need(ok, f"{path}.slope", "must be a number or a list of n-1 numbers")
        _need(_is_num(cfg.get("r", 1.0)) and cfg.get("r", 1.0) > 0, f"{path}.r", "must be positive")
        _need(_is_int(cfg.get("resolution", 4)) and cfg.get("resolution", 4) >= 1, f"{path}.resolution",
              "must be a positive integer")
        _need(cfg.get("base", "square") in ("square", "disk"), f"{path}.base", "must be 'square' or 'disk'")
    elif builder == "half_ball":
        _need(_is_int(cfg.get("n", 3)) and cfg.get("n", 3) >= 2, f"{path}.n", "must be an integer >= 2")
        _need(_is_int(cfg.get("k", 4)) and cfg.get("k", 4) >= 1, f"{path}.k", "must be a positive integer")
        _need(_is_num(cfg.get("radius", 1.0)) and cfg.get("radius", 1.0) > 0, f"{path}.radius", "must be positive")
    else:
        _need(isinstance(cfg.get("path"), str), f"{path}.path", "must be a file path")


def build_mesh(cfg: dict, level: int | None = None) -> SimplicialMesh:
    """Build the mesh described by ``cfg``; ``level`` overrides the resolution."""
    validate_mesh_config(cfg)
    builder = cfg["builder"]
    res_key = BUILDERS[builder][1]
    if level is not None and res_key is not None:
        cfg = dict(cfg, **{res_key: int(level)})
    if builder == "unit_cube":
        return unit_cube(cfg.get("n", 3), cfg.get("k", 8))
    if builder == "box":
        return build_box_mesh(cfg["lower"], cfg["upper"], cfg.get("subdivisions", 8))
    if builder == "graph":
        n = cfg.get("n", 3)
        slope = cfg.get("slope", 0.0)
        slope = [slope] * (n - 1) if _is_num(slope) else slope
        if cfg.get("base", "square") == "disk" and n != 3:
            raise ConfigError("mesh.base", "disk base needs n = 3")
        spec = linear_graph(slope, n=n, r=cfg.get("r", 1.0), base=cfg.get("base", "square"))
        return build_graph_domain_mesh(spec, cfg.get("resolution", 4))
    if builder == "half_ball":
        return build_half_ball_mesh(cfg.get("n", 3), cfg.get("k", 4), cfg.get("radius", math.exp(-1)))
    try:
        return SimplicialMesh.from_json(Path(cfg["path"]).read_text())
    except (OSError, ValueError, KeyError) as exc:
        raise ConfigError("mesh.path", f"cannot load mesh: {exc}") from None


# ----------------------------------------------------------------------
# Coefficients
# ----------------------------------------------------------------------
def _shape_of(value):
    arr = np.asarray(value, dtype=float)
    return arr.shape


def validate_coefficients(cfg, n: int, path="coefficients") -> None:
    _need(isinstance(cfg, dict), path, "must be an object")
    for role, entry in cfg.items():
        p = f"{path}.{role}"
        _need(role in ROLE_RANK, p, f"unknown coefficient; expected one of {sorted(ROLE_RANK)}")
        _need(isinstance(entry, dict), p, "must be an object {kind, value}")
        for key in entry:
            _need(key in ("kind", "value"), f"{p}.{key}", "unknown key")
        kind = entry.get("kind")
        _need(kind in COEFF_KINDS, f"{p}.kind", f"must be one of {list(COEFF_KINDS)}")
        _need("value" in entry, f"{p}.value", "missing")
        rank = ROLE_RANK[role]
        shape = (n,) * rank
        value = entry["value"]
        if kind == "expr":
            try:
                _, got = compile_expression(value, n)
            except ExpressionError as exc:
                raise ConfigError(f"{p}.value", str(exc)) from None
            _need(got == shape, f"{p}.value", f"expression has shape {got}, expected {shape}")
        elif kind == "constant":
            try:
                got = _shape_of(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{p}.value", "must be a number or nested list of numbers") from None
            _need(got == shape, f"{p}.value", f"has shape {got}, expected {shape}")
            _need(np.all(np.isfinite(np.asarray(value, dtype=float))), f"{p}.value", "must be finite")
        else:
            _need(kind != "per_facet" or role == "g", f"{p}.kind", "per_facet is only valid for g")
            try:
                got = _shape_of(value)
            except (TypeError, ValueError):
                raise ConfigError(f"{p}.value", "must be a list of per-element values") from None
            _need(len(got) >= 1 and got[1:] == shape, f"{p}.value", f"entries must have shape {shape}")


def make_coefficients(cfg: dict, mesh: SimplicialMesh, path="coefficients") -> dict:
    """Coefficient fields keyed by role, ready for :class:`ProblemSpec`."""
    cfg = cfg or {}
    validate_coefficients(cfg, mesh.n, path)
    out = {}
    for role, entry in cfg.items():
        kind, value = entry["kind"], entry["value"]
        if kind == "expr":
            fn, shape = compile_expression(value, mesh.n)
            out[role] = CoefficientField.analytic(fn, shape, role)
        elif kind == "constant":
            out[role] = CoefficientField.constant(value, role)
        elif kind == "per_cell":
            arr = np.asarray(value, dtype=float)
            if role == "g":
                raise ConfigError(f"{path}.g.kind", "g lives on the boundary; use per_facet")
            if len(arr) != mesh.n_cells:
                raise ConfigError(f"{path}.{role}.value", f"{len(arr)} values for {mesh.n_cells} cells")
            out[role] = CoefficientField.per_cell(arr, role)
        else:
            arr = np.asarray(value, dtype=float)
            if len(arr) != len(mesh.boundary_facets):
                raise ConfigError(f"{path}.g.value",
                                  f"{len(arr)} values for {len(mesh.boundary_facets)} boundary facets")
            out[role] = CoefficientField.per_facet(arr, role)
    return out


# ----------------------------------------------------------------------
# Run configuration
# ----------------------------------------------------------------------
@dataclass
class ExperimentRequest:
    name: str
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"name": self.name, "params": self.params, "tolerances": self.tolerances}


@dataclass
class RunConfig:
    experiments: list
    seed: int = 0
    output: str = "runs"
    mesh: dict | None = None
    coefficients: dict | None = None
    refinements: list | None = None
    schema_version: int = SCHEMA_VERSION

    def to_dict(self) -> dict:
        doc = {"schema_version": self.schema_version, "seed": self.seed, "output": self.output,
               "experiments": [e.to_dict() for e in self.experiments]}
        for key in ("mesh", "coefficients", "refinements"):
            if getattr(self, key) is not None:
                doc[key] = copy.deepcopy(getattr(self, key))
        return doc

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    def digest(self) -> str:
        """Hash of the canonical form minus the output location."""
        doc = self.to_dict()
        doc.pop("output")
        text = json.dumps(doc, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]

    def problem_inputs(self) -> dict:
        """Keys handed to experiments that take a problem."""
        out = {}
        if self.mesh is not None:
            out["mesh"] = self.mesh
        if self.coefficients is not None:
            out["coefficients"] = self.coefficients
        if self.refinements is not None:
            out["levels"] = self.refinements
        return out


def parse_config(doc, registry=None) -> RunConfig:
    """Validate a decoded JSON document and build a :class:`RunConfig`.

    ``registry`` (name -> experiment) enables checking experiment names,
    parameter names and tolerance names before anything runs.
    """
    _need(isinstance(doc, dict), "", "configuration must be a JSON object")
    for key in doc:
        _need(key in TOP_KEYS, key, f"unknown key; expected one of {sorted(TOP_KEYS)}")
    version = doc.get("schema_version", SCHEMA_VERSION)
    _need(version == SCHEMA_VERSION, "schema_version", f"unsupported version {version!r} (this build reads {SCHEMA_VERSION})")
    seed = doc.get("seed", 0)
    _need(_is_int(seed) and seed >= 0, "seed", "must be a non-negative integer")
    output = doc.get("output", "runs")
    _need(isinstance(output, str) and output, "output", "must be a nonempty string")
    mesh = doc.get("mesh")
    n = 3
    if mesh is not None:
        validate_mesh_config(mesh)
        n = mesh.get("n", len(mesh["lower"]) if mesh["builder"] == "box" else 3)
    coeffs = doc.get("coefficients")
    if coeffs is not None:
        validate_coefficients(coeffs, n)
    refinements = doc.get("refinements")
    if refinements is not None:
        _need(isinstance(refinements, list) and refinements and all(_is_int(x) and x >= 1 for x in refinements),
              "refinements", "must be a nonempty list of positive integers")
    exps = doc.get("experiments")
    _need(isinstance(exps, list) and exps, "experiments", "must be a nonempty list")
    requests = []
    for i, entry in enumerate(exps):
        p = f"experiments[{i}]"
        if isinstance(entry, str):
            entry = {"name": entry}
        _need(isinstance(entry, dict), p, "must be a name or an object {name, params, tolerances}")
        for key in entry:
            _need(key in ("name", "params", "tolerances"), f"{p}.{key}", "unknown key")
        name = entry.get("name")
        _need(isinstance(name, str), f"{p}.name", "must be a string")
        params = entry.get("params", {})
        tols = entry.get("tolerances", {})
        _need(isinstance(params, dict), f"{p}.params", "must be an object")
        _need(isinstance(tols, dict), f"{p}.tolerances", "must be an object")
        if registry is not None:
            _need(name in registry, f"{p}.name", f"unknown experiment {name!r}; run 'neumannlab list'")
            exp = registry[name]
            for key in params:
                _need(key in exp.params, f"{p}.params.{key}",
                      f"unknown parameter for {name!r}; expected one of {sorted(exp.params)}")
            for key, val in tols.items():
                _need(key in exp.tolerances, f"{p}.tolerances.{key}",
                      f"unknown tolerance for {name!r}; expected one of {sorted(exp.tolerances)}")
                _need(_is_num(val) and val >= 0, f"{p}.tolerances.{key}", "must be a non-negative number")
        requests.append(ExperimentRequest(name, dict(params), dict(tols)))
    return RunConfig(experiments=requests, seed=seed, output=output, mesh=mesh, coefficients=coeffs,
                     refinements=refinements, schema_version=version)


def load_config(path, registry=None) -> RunConfig:
    """Read and validate a JSON configuration file."""
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError("", f"cannot read {path}: {exc.strerror}") from None
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return parse_config(doc, registry)
