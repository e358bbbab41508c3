"""Experiment runners, report format and frozen high-precision oracles.

Oracle values were computed once with mpmath at 30 digits, independently of
the package code, and are frozen here.
"""
import json
import math

import numpy as np
import pytest

from neumannlab.experiments import REGISTRY, EstimateReport, get, run_experiment
from neumannlab.experiments.appendix import (DsFamily, _b_norm_n, counterexample_log_singular, f_delta,
                                             find_delta)
from neumannlab.experiments.estimates import poincare_ratio, run_trace
from neumannlab.experiments.report import clean, slope
from neumannlab.fe import interpolate
from neumannlab.mesh import build_box_mesh, unit_cube

DELTA_STAR = 1.31490283471829269
F0 = 1.15231802765107368
CONE_B3 = 1.12725249737165803
SIXTH_ROOT = 1.56508458007328732  # 6 ** (1 / 4)


def test_oracle_delta():
    delta, f0, f2 = find_delta()
    assert delta == pytest.approx(DELTA_STAR, rel=1e-14)
    assert f0 == pytest.approx(F0, rel=1e-13)
    assert f_delta(delta) == pytest.approx(1.0, abs=1e-13)
    assert f2 == 0.0


def test_oracle_b_norms():
    cone = _b_norm_n("cone", 3)
    assert all(v == pytest.approx(CONE_B3, rel=1e-10) for v in cone.values())
    half = _b_norm_n("halfball", 3)
    assert all(v == pytest.approx(math.pi, rel=1e-10) for v in half.values())


def test_oracle_trace_constant():
    rep = run_trace(unit_cube(3, 2), samples=3)
    assert rep.measured["constant_ratio"] == pytest.approx(SIXTH_ROOT, rel=1e-12)


def test_oracle_poincare_cosine():
    mesh = build_box_mesh([0, 0, 0], [1, .1, .1], [96, 1, 1])
    u = interpolate(mesh, lambda X: np.cos(np.pi * X[:, 0]))
    assert poincare_ratio(u, p=2.0) == pytest.approx(1 / math.pi, rel=1e-3)


def test_ds_family_closed_forms():
    fam = DsFamily(0.05, 3)
    assert fam.integral_d() == pytest.approx(fam.integral_d_closed(), rel=1e-9)


@pytest.mark.parametrize("variant", ["halfball", "cone"])
def test_log_singular(variant):
    rep = counterexample_log_singular(variant, samples=2000)
    assert rep.passed, rep.failed_checks()


def test_registry_metadata():
    assert len(REGISTRY) == 22
    for exp in REGISTRY.values():
        d = exp.describe()
        assert d["name"] == exp.name and d["anchor"]
        assert set(d["tolerances"]) == set(exp.tolerances)


def test_unknown_keys_rejected():
    with pytest.raises(KeyError):
        get("no-such-experiment")
    with pytest.raises(KeyError, match="bogus"):
        get("appendix-1d").run({"bogus": 1}, {}, 0, None)


def test_report_is_deterministic():
    a = run_experiment("appendix-1d").to_json()
    b = run_experiment("appendix-1d").to_json()
    assert a == b
    doc = json.loads(a)
    assert doc["passed"] and doc["tolerance"]["f_root"] == 1e-12
    assert "runtime" not in doc


def test_tolerance_override_can_fail():
    rep = run_experiment("green-scaling", tolerances={"relative": 0.0})
    assert not rep.passed and rep.failed_checks() == ["r=0.5", "r=2"]


def test_clean_rounds_and_encodes():
    assert clean({"a": np.float64(1 / 3), "b": np.array([np.inf, np.nan]), "c": (np.int64(2), True)}) == \
        {"a": 0.333333333333, "b": ["inf", "nan"], "c": [2, True]}


def test_slope():
    x = np.array([1.0, 2.0, 4.0])
    assert slope(x, 3 * x ** -1.5) == pytest.approx(-1.5)


def test_report_line():
    rep = EstimateReport(name="x")
    rep.check("a", True)
    rep.check("b", False)
    assert rep.line() == "FAIL x (failed: b)"
