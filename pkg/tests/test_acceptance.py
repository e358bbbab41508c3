"""The fourteen acceptance criteria at their stated tolerances.

Each criterion runs its registered experiment with default parameters and
prints one ``PASS``/``FAIL`` line.  The pinned tolerance tables guard
against a default drifting away from the criterion.
"""
import pytest

from neumannlab.experiments import run_experiment

CRITERIA = [
    (1, "kernel-dim-cube", {"gap_min": 10.0, "residual": 1e-10}),
    (2, "appendix-eigen-cube", {"shrink_min": 3.0}),
    (3, "appendix-1d", {"f_root": 1e-12, "u_prime": 1e-10}),
    (4, "appendix-tensor-kernel", {"gap_min": 10.0, "capture_min": 0.99}),
    (5, "green-symmetry", {"matched": 1e-9}),
    (6, "green-scaling", {"relative": 1e-9}),
    (7, "green-pointwise", {"factor": 1.5, "norm_stability": 0.5}),
    (8, "representation", {"finest_error": 0.05, "reduction": 2.0, "duality": 1e-9}),
    (9, "lorentz-engine", {"indicator": 1e-12, "equimeasurable": 1e-8}),
    (10, "splitting", {"violation": 1e-12, "budget": 1e-10, "mean_zero": 1e-10}),
    (11, "scale-invariance", {"relative": 1e-9}),
    (12, "subsolution-rigidity", {"sum": 1e-12}),
    (13, "appendix-ds-family", {"rate": 0.1}),
    (14, "condition-checker", {"cone": 1e-12}),
]

INPUTS = {
    1: {"k": 8},
    2: {"levels": [8, 16]},
    4: {"k_detect": 12, "k_capture": 16},
    8: {"levels": [4, 8, 16], "pairs": 10},
    10: {"samples": 50},
    11: {"r": [0.5, 1.0, 2.0, 4.0]},
    13: {"s_values": [2.0 ** -k for k in range(2, 8)]},
    14: {"samples": 100},
}


@pytest.mark.parametrize("number, name, tolerances", CRITERIA, ids=[f"{c[0]:02d}-{c[1]}" for c in CRITERIA])
def test_criterion(number, name, tolerances, capsys):
    rep = run_experiment(name)
    with capsys.disabled():
        print(f"\ncriterion {number:2d}: {rep.line()}  [{rep.runtime:.1f} s]")
    for key, value in tolerances.items():
        assert rep.tolerance[key] == value, key
    for key, value in INPUTS.get(number, {}).items():
        assert rep.inputs[key] == pytest.approx(value), key
    assert rep.passed, rep.failed_checks()


def test_criterion_3_values():
    rep = run_experiment("appendix-1d")
    m = rep.measured
    assert 0 < m["delta"] < 2 and abs(m["f_delta_minus_1"]) < 1e-12
    assert m["f2"] == 0.0 and m["f0"] > 1


def test_criterion_12_has_no_strict_subsolution():
    rep = run_experiment("subsolution-rigidity")
    assert rep.checks["partition_of_unity"] and rep.checks["no_strict_subsolution"]
