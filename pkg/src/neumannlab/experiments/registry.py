"""Named experiments.

Each entry couples a runner with its default parameters and tolerances.  A
runner has the signature ``runner(params, tol, seed, problem)`` where
``problem`` is ``None`` or a dict with optional ``mesh``, ``coefficients``
and ``levels`` keys in the JSON configuration format.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.optimize import linprog

from ..assembly import (ProblemError, ProblemSpec, assemble_forms, check_sign_condition, condition_functional,
                        data_norm, hat_functionals, kernel_analysis, residual_vector, scale_problem, solve_neumann,
                        subsolution_rigidity)
from ..config import build_mesh, make_coefficients
from ..fe import CoefficientField, FeFunction, P0Field, lp_norm, mass_lumped, y_norm
from ..green import (check_green_scaling, check_symmetry, duality_pairing, green_table, pointwise_bound_constant,
                     represent_solution)
from ..lorentz import lorentz_norm
from ..mesh import build_box_mesh, unit_cube
from ..splitting import split_mean_zero, split_plain, verify_split
from . import appendix, estimates
from .report import EstimateReport, table_csv, timed
from .tools import random_family


@dataclass(frozen=True)
class Experiment:
    name: str
    description: str
    anchor: str
    runner: Callable
    params: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)
    takes_problem: bool = False

    def run(self, params=None, tolerances=None, seed: int = 0, problem=None) -> EstimateReport:
        p = dict(self.params, **(params or {}))
        t = dict(self.tolerances, **(tolerances or {}))
        unknown = (set(params or ()) - set(self.params)) | (set(tolerances or ()) - set(self.tolerances))
        if unknown:
            raise KeyError(f"{self.name}: unknown parameter or tolerance {sorted(unknown)}")
        rep = self.runner(p, t, seed, problem if self.takes_problem else None)
        rep.name = self.name
        rep.tolerance = dict(t, **rep.tolerance)
        return rep

    def describe(self) -> dict:
        return {"name": self.name, "description": self.description, "anchor": self.anchor,
                "params": self.params, "tolerances": self.tolerances, "takes_problem": self.takes_problem}


# ----------------------------------------------------------------------
# Problem plumbing
# ----------------------------------------------------------------------
CUBE = {"builder": "unit_cube", "n": 3, "k": 8}


def problem_specs(problem, mesh=CUBE, coefficients=None, levels=(8,)) -> list:
    """One :class:`ProblemSpec` per refinement level."""
    problem = problem or {}
    mesh_cfg = problem.get("mesh", mesh)
    coeffs = problem.get("coefficients", coefficients) or {}
    out = []
    for lev in problem.get("levels", levels):
        m = build_mesh(mesh_cfg, lev)
        out.append(ProblemSpec(m, **make_coefficients(coeffs, m)))
    return out


def _stability(values) -> float:
    """``max/min - 1`` of a positive series (0 for a single value)."""
    v = np.asarray([x for x in values if x is not None], dtype=float)
    if len(v) < 2:
        return 0.0
    if np.any(v <= 0):
        return 0.0 if np.all(v == 0) else math.inf
    return float(v.max() / v.min() - 1.0)


def _merge_levels(name: str, reports: list, key: str, tol: float) -> EstimateReport:
    """Series of per-level reports with a refinement-stability check on ``measured[key]``."""
    rep = EstimateReport(name=name)
    for r in reports:
        rep.mesh_hashes.extend(h for h in r.mesh_hashes if h not in rep.mesh_hashes)
        row = {"mesh": r.mesh_hashes[0] if r.mesh_hashes else None, "checks": r.checks}
        row.update(r.measured)
        rep.series.append(row)
        for c, ok in r.checks.items():
            rep.checks[c] = rep.checks.get(c, True) and ok
        rep.notes.extend(n for n in r.notes if n not in rep.notes)
    rep.inputs = dict(reports[-1].inputs)
    values = [r.measured.get(key) for r in reports]
    rep.measured = dict(reports[-1].measured)
    rep.measured[f"{key}_levels"] = values
    rep.measured["stability"] = _stability(values)
    rep.check("stability", rep.measured["stability"] <= tol)
    return rep


# ----------------------------------------------------------------------
# Kernel
# ----------------------------------------------------------------------
@timed
def _kernel_dim_cube(p, tol, seed, problem):
    mesh = unit_cube(3, p["k"])
    rep = EstimateReport(name="kernel-dim-cube")
    rep.add_mesh(mesh)
    rep.inputs = {"k": p["k"]}
    k0 = kernel_analysis(ProblemSpec(mesh, d=0.0))
    k1 = kernel_analysis(ProblemSpec(mesh, d=1.0))
    rep.measured = {"d0": k0.summary(), "d1": k1.summary(), "dimension": k0.dimension}
    rep.check("d0_dimension_1", k0.dimension == 1)
    rep.check("d1_dimension_0", k1.dimension == 0)
    rep.check("gap", k0.gap >= tol["gap_min"])
    if k0.uhat is not None:
        # normalized constant: |Omega|^{-(n-2)/(2n)} = 1 on the unit cube
        const_err = float(np.max(np.abs(k0.uhat.values - mesh.volume ** (-(mesh.n - 2) / (2 * mesh.n)))))
        rep.measured["uhat_constant_error"] = const_err
        rep.measured["uhat_residual"] = float(k0.residuals[0])
        rep.check("uhat_constant", const_err <= tol["residual"])
        rep.check("uhat_residual", k0.residuals[0] <= tol["residual"])
        rep.check("uhat_positive", bool(k0.uhat_positive))
    else:
        rep.check("uhat_constant", False)
    return rep


@timed
def _eigen_cube(p, tol, seed, problem):
    return appendix.eigen_cube(tuple(p["levels"]), tol["shrink_min"], p["count"])


@timed
def _tensor_kernel(p, tol, seed, problem):
    return appendix.counterexample_tensor_kernel(p.get("delta"), p["k_detect"], p["k_capture"],
                                                 tol["gap_min"], tol["capture_min"])


@timed
def _one_d(p, tol, seed, problem):
    return appendix.counterexample_1d_delta(tol["f_root"], tol["u_prime"])


# ----------------------------------------------------------------------
# Green functions
# ----------------------------------------------------------------------
SOURCES = np.array([[0.3, 0.4, 0.5], [0.6, 0.55, 0.4], [0.45, 0.7, 0.65], [0.7, 0.3, 0.6], [0.35, 0.35, 0.3]])
A_SYM = [[2.0, 0.5, 0.0], [0.5, 1.0, 0.2], [0.0, 0.2, 1.5]]
A_NONSYM = [[1.0, 0.3, 0.0], [-0.1, 1.0, 0.2], [0.0, 0.0, 1.2]]


def _drift(X):
    return 0.3 * (X - 0.5)


@timed
def _green_symmetry(p, tol, seed, problem):
    rep = EstimateReport(name="green-symmetry")
    rep.inputs = {"k_matched": p["k_matched"], "levels": p["levels"], "sources": SOURCES}
    mesh = unit_cube(3, p["k_matched"])
    rep.add_mesh(mesh)
    m = check_symmetry(ProblemSpec(mesh, A=np.array(A_SYM), d=1.0), SOURCES, mode="matched")
    rep.measured["matched_relative"] = m.relative
    rep.check("matched", m.relative <= tol["matched"])
    devs = []
    for k in p["levels"]:
        mesh = unit_cube(3, k)
        rep.add_mesh(mesh)
        spec = ProblemSpec(mesh, A=np.array(A_NONSYM), b=_drift, c=np.array([0.2, -0.1, 0.3]), d=1.0)
        s = check_symmetry(spec, SOURCES, mode="nodal")
        devs.append(s.relative)
        rep.series.append({"k": k, "relative": s.relative, "deviation": s.deviation,
                           "bd_holds": s.bd_holds, "cd_holds": s.cd_holds})
    rep.measured["nodal_relative"] = devs
    rep.check("nodal_monotone", all(b < a for a, b in zip(devs[:-1], devs[1:])))
    return rep


@timed
def _green_scaling(p, tol, seed, problem):
    rep = EstimateReport(name="green-scaling")
    mesh = unit_cube(3, p["k"])
    rep.add_mesh(mesh)
    spec = ProblemSpec(mesh, A=np.array(A_NONSYM), b=_drift, c=np.array([0.2, -0.1, 0.3]), d=1.0)
    rep.inputs = {"k": p["k"], "r": p["r"]}
    for r in p["r"]:
        s = check_green_scaling(spec, r, SOURCES)
        rep.series.append({"r": r, "relative": s.relative, "constants": list(s.constants)})
        rep.check(f"r={r:g}", s.relative <= tol["relative"])
    rep.measured["max_relative"] = max(row["relative"] for row in rep.series)
    return rep


@timed
def _green_pointwise(p, tol, seed, problem):
    rep = EstimateReport(name="green-pointwise")
    rep.inputs = {"levels": p["levels"], "exclusion": p["exclusion"]}
    consts, norms = [], []
    for k in p["levels"]:
        mesh = unit_cube(3, k)
        rep.add_mesh(mesh)
        tab = green_table(ProblemSpec(mesh, d=1.0), SOURCES)
        c = pointwise_bound_constant(tab, p["exclusion"])["constant"]
        consts.append(c)
        nk = {key: max(nm[key] for nm in tab.norms) for key in tab.norms[0]}
        norms.append(nk)
        rep.series.append(dict(k=k, constant=c, **nk))
    factor = max(consts) / min(consts) if min(consts) > 0 else math.inf
    rep.measured = {"constants": consts, "factor": factor}
    rep.check("pointwise_factor", factor < tol["factor"])
    for key in norms[0]:
        vals = [nk[key] for nk in norms]
        st = _stability(vals)
        rep.measured[f"{key}_stability"] = st
        rep.check(f"{key}_finite", all(math.isfinite(v) and v > 0 for v in vals))
        rep.check(f"{key}_stable", st <= tol["norm_stability"])
    return rep


def _smooth_f(X):
    return np.cos(np.pi * X[:, 0]) * X[:, 1] + 1.0


@timed
def _representation(p, tol, seed, problem):
    rep = EstimateReport(name="representation")
    rep.inputs = {"levels": p["levels"], "pairs": p["pairs"], "seed": seed}
    errs = []
    spec = None
    for k in p["levels"]:
        mesh = unit_cube(3, k)
        rep.add_mesh(mesh)
        spec = ProblemSpec(mesh, A=np.array(A_NONSYM), b=_drift, d=1.0)
        tab = green_table(spec, SOURCES, norms=False)
        r = represent_solution(tab, f=_smooth_f)
        errs.append(r.relative_error)
        rep.series.append({"k": k, "relative_error": r.relative_error})
    rates = [a / b for a, b in zip(errs[:-1], errs[1:])]
    rep.measured = {"relative_errors": errs, "reduction": rates}
    rep.check("finest_error", errs[-1] < tol["finest_error"])
    rep.check("reduction", all(x >= tol["reduction"] for x in rates))
    # duality on random (source, data) pairs at the coarsest level
    rng = np.random.default_rng(seed)
    mesh = unit_cube(3, p["levels"][0])
    spec = ProblemSpec(mesh, A=np.array(A_NONSYM), b=_drift, d=1.0)
    ys = rng.uniform(0.15, 0.85, size=(p["pairs"], 3))
    tab = green_table(spec, ys, norms=False)
    worst = 0.0
    for i in range(p["pairs"]):
        k = rng.integers(0, 3, size=3)
        ph = rng.uniform(0, 2 * np.pi)
        f = (lambda X, k=k, ph=ph: np.cos(np.pi * X @ k + ph) + 0.5)
        lhs, rhs = duality_pairing(tab, i, f)
        worst = max(worst, abs(lhs - rhs) / max(abs(lhs), abs(rhs), 1e-300))
    rep.measured["duality_worst"] = worst
    rep.check("duality", worst < tol["duality"])
    return rep


# ----------------------------------------------------------------------
# Lorentz engine and splitting
# ----------------------------------------------------------------------
@timed
def _lorentz_engine(p, tol, seed, problem):
    rng = np.random.default_rng(seed)
    mesh = unit_cube(3, p["k"])
    rep = EstimateReport(name="lorentz-engine")
    rep.add_mesh(mesh)
    rep.inputs = {"k": p["k"], "seed": seed}
    worst = 0.0
    for frac in (0.1, 0.37, 0.5, 1.0):
        chosen = rng.random(mesh.n_cells) < frac
        if not chosen.any():
            chosen[0] = True
        ind = P0Field(mesh, chosen.astype(float))
        E = float(mesh.volumes[chosen].sum())
        for pp, qq in ((1.5, 1.0), (2.0, 1.0), (3.0, 2.0), (1.5, math.inf), (3.0, math.inf), (2.0, 2.0)):
            got = lorentz_norm(ind, (pp, qq))
            exact = E ** (1 / pp) if math.isinf(qq) else (pp / qq) ** (1 / qq) * E ** (1 / pp)
            worst = max(worst, abs(got - exact) / exact)
    rep.measured["indicator_worst"] = worst
    rep.check("indicator", worst <= tol["indicator"])
    worst_eq = 0.0
    for _, v in random_family(mesh, p["samples"], rng):
        f = FeFunction(mesh, v)
        for pp in (1.0, 1.5, 2.0, 3.0):
            a, b = lorentz_norm(f, (pp, pp)), lp_norm(f, pp)
            worst_eq = max(worst_eq, abs(a - b) / b)
    rep.measured["equimeasurable_worst"] = worst_eq
    rep.check("equimeasurable", worst_eq <= tol["equimeasurable"])
    return rep


@timed
def _splitting(p, tol, seed, problem):
    rng = np.random.default_rng(seed)
    mesh = unit_cube(3, p["k"])
    rep = EstimateReport(name="splitting")
    rep.add_mesh(mesh)
    rep.inputs = {"k": p["k"], "samples": p["samples"], "seed": seed}
    mass = mass_lumped(mesh)
    worst = budget = mean_err = 0.0
    bound_ok = True
    counts = []
    for i, (label, v) in enumerate(random_family(mesh, p["samples"], rng)):
        u = FeFunction(mesh, v)
        h = rng.uniform(0.0, 2.0, mesh.n_cells) * (rng.random(mesh.n_cells) < 0.7)
        hn = float(np.sum(h ** 3 * mesh.volumes)) ** (1 / 3)
        eps = hn / rng.uniform(1.0, 2.5)
        side = "positive" if i % 2 == 0 else "both"
        h = P0Field(mesh, h)
        res = split_plain(u, h, eps, side)
        r = verify_split(res, seed=seed + i)
        worst = max(worst, r.worst)
        budget = max(budget, r.budget_error)
        bound_ok &= r.bound_ok
        counts.append(r.N)
        u0 = FeFunction(mesh, v - float(mass @ v) / mesh.volume)
        res0 = split_mean_zero(u0, h, eps)
        r0 = verify_split(res0, seed=seed + i)
        worst = max(worst, r0.worst)
        budget = max(budget, r0.budget_error)
        bound_ok &= r0.bound_ok
        mean_err = max([mean_err] + [abs(m) for m in r0.piece_means])
    rep.measured = {"worst_violation": worst, "budget_error": budget, "piece_mean_error": mean_err,
                    "piece_counts": counts}
    rep.check("properties", worst < tol["violation"])
    rep.check("budget", budget <= tol["budget"])
    rep.check("mean_zero", mean_err < tol["mean_zero"])
    rep.check("piece_bound", bound_ok)
    return rep


# ----------------------------------------------------------------------
# Scaling, rigidity, conditions
# ----------------------------------------------------------------------
SCALE_COEFFS = {
    "A": {"kind": "expr", "value": [["1 + 0.3*x1", "0.1", "0"], ["0.1", "1", "0"], ["0", "0", "1.2 - 0.2*x2"]]},
    "b": {"kind": "expr", "value": ["0.3*x1", "-0.2*x2", "0.1"]},
    "c": {"kind": "constant", "value": [0.2, -0.1, 0.3]},
    "d": {"kind": "expr", "value": "1 + 0.5*x3"},
    "f": {"kind": "expr", "value": "cos(pi*x1)*x2 + 0.5"},
    "F": {"kind": "expr", "value": ["x2", "0", "-x1"]},
    "g": {"kind": "expr", "value": "x3"},
}


@timed
def _scale_invariance(p, tol, seed, problem):
    spec = problem_specs(problem, CUBE, SCALE_COEFFS, (p["k"],))[0]
    rep = EstimateReport(name="scale-invariance")
    rep.add_mesh(spec.mesh)
    rep.inputs = {"r": p["r"], "k": p["k"]}
    ratios = []
    for r in p["r"]:
        s = spec if r == 1 else scale_problem(spec, r)
        u = solve_neumann(s).u
        ratio = y_norm(u) / data_norm(s)
        ratios.append(ratio)
        rep.series.append({"r": r, "y_norm": y_norm(u), "data_norm": data_norm(s), "ratio": ratio})
    spread = (max(ratios) - min(ratios)) / max(ratios)
    rep.measured = {"ratios": ratios, "relative_spread": spread}
    rep.check("invariant", spread <= tol["relative"])
    return rep


@timed
def _rigidity(p, tol, seed, problem):
    rng = np.random.default_rng(seed)
    mesh = unit_cube(3, p["k"])
    rep = EstimateReport(name="subsolution-rigidity")
    rep.add_mesh(mesh)
    rep.inputs = {"k": p["k"], "samples": p["samples"], "seed": seed}
    # d = c = 0, compatible data: int f + int g = 0
    spec = ProblemSpec(mesh, A=np.array(A_NONSYM), b=_drift, f=lambda X: X[:, 0] - 0.5,
                       g=lambda X: X[:, 1] - 0.5)
    system = assemble_forms(spec)
    sol = solve_neumann(system).u
    rr = subsolution_rigidity(system, sol)
    rep.measured["solution"] = {"residual_sum": rr.residual_sum, "identity_error": rr.identity_error,
                                "max_abs": rr.max_abs}
    rep.check("solution_consistent", rr.consistent and rr.all_zero)
    # any u: sum of residuals vanishes to round-off
    worst = 0.0
    for _, v in random_family(mesh, p["samples"], rng):
        r = residual_vector(system, FeFunction(mesh, v))
        scale = float(np.sum(np.abs(r.r))) + 1e-300
        worst = max(worst, abs(r.total) / scale)
        rg = subsolution_rigidity(system, FeFunction(mesh, v))
        rep.check("consistent", rep.checks.get("consistent", True) and rg.consistent)
    rep.measured["residual_sum_worst"] = worst
    rep.check("partition_of_unity", worst <= tol["sum"])
    # LP: is there u with K u - L <= 0 and sum (K u - L) <= -1?  must be infeasible
    K = system.K.toarray()
    L = system.load
    N = len(L)
    A_ub = np.vstack([K, K.sum(axis=0, keepdims=True)])
    b_ub = np.concatenate([L, [L.sum() - 1.0]])
    lp = linprog(np.zeros(N), A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * N, method="highs")
    rep.measured["lp_status"] = int(lp.status)
    rep.measured["lp_message"] = lp.message
    rep.check("no_strict_subsolution", lp.status == 2)
    return rep


@timed
def _condition_checker(p, tol, seed, problem):
    rng = np.random.default_rng(seed)
    mesh = unit_cube(3, p["k"])
    n = mesh.n
    rep = EstimateReport(name="condition-checker")
    rep.add_mesh(mesh)
    rep.inputs = {"k": p["k"], "samples": p["samples"], "seed": seed}
    e_n = np.zeros(n)
    e_n[-1] = 1.0
    bad = ProblemSpec(mesh, b=e_n, d=0.0)
    cr = check_sign_condition(bad, "bd")
    neg = np.nonzero(cr.values < -cr.tol)[0]
    bottom = np.abs(mesh.vertices[:, -1]) <= 1e-12
    rep.measured["half_space"] = cr.summary()
    rep.measured["negative_hats"] = int(len(neg))
    rep.check("half_space_fails", not cr.holds)
    rep.check("negatives_on_bottom", len(neg) > 0 and bool(np.all(bottom[neg])))
    good = ProblemSpec(mesh, b=None, d=CoefficientField.per_cell(rng.uniform(0.0, 2.0, mesh.n_cells)))
    gr = check_sign_condition(good, "bd")
    rep.measured["b0_d_nonneg"] = gr.summary()
    rep.check("b0_passes", gr.holds)
    worst = 0.0
    signs_ok = True
    for spec, rep_c in ((bad, cr), (good, gr)):
        vals, _ = hat_functionals(spec, "bd")
        for _ in range(p["samples"]):
            alpha = rng.random(mesh.n_vertices) * (rng.random(mesh.n_vertices) < 0.3)
            phi = FeFunction(mesh, alpha)
            got = condition_functional(spec, phi, "bd")
            lin = float(alpha @ vals)
            worst = max(worst, abs(got - lin) / max(float(alpha @ np.abs(vals)), 1e-300))
            if rep_c.holds and got < -rep_c.tol * max(alpha.sum(), 1.0):
                signs_ok = False
    rep.measured["cone_linearity_worst"] = worst
    rep.check("cone_linearity", worst <= tol["cone"])
    rep.check("passing_case_nonnegative", signs_ok)
    return rep


# ----------------------------------------------------------------------
# Estimates on configurable problems
# ----------------------------------------------------------------------
MAIN_DEFAULTS = {
    "delta_zero": {"b": {"kind": "expr", "value": ["0.3*(x1 - 0.5)", "0.3*(x2 - 0.5)", "0.3*(x3 - 0.5)"]},
                   "f": {"kind": "expr", "value": "x1 - 0.5"}},
    "delta_positive": {"c": {"kind": "constant", "value": [0.5, -0.2, 0.1]},
                       "d": {"kind": "constant", "value": 1.0},
                       "f": {"kind": "expr", "value": "cos(pi*x1) + 0.5"},
                       "g": {"kind": "expr", "value": "x2"}},
}
MODIFIED_DEFAULTS = {"c": {"kind": "constant", "value": [0.5, -0.2, 0.1]}, "d": {"kind": "constant", "value": 1.0}}


@timed
def _poincare(p, tol, seed, problem):
    coeffs = MODIFIED_DEFAULTS if p["variant"] == "modified" else None
    specs = problem_specs(problem, CUBE, coeffs, p["levels"])
    reps = [estimates.run_poincare(s.mesh, p["variant"], p["samples"], seed, p["delta"], s.c, s.d, p["delta0"])
            for s in specs]
    return _merge_levels("poincare", reps, "C0", tol["stability"])


@timed
def _trace(p, tol, seed, problem):
    specs = problem_specs(problem, CUBE, None, p["levels"])
    reps = [estimates.run_trace(s.mesh, p["p"], p["samples"], seed) for s in specs]
    rep = _merge_levels("trace", reps, "C_strong", tol["stability"])
    if "C_weak" in rep.measured:
        weak = [r.measured["C_weak"] for r in reps]
        rep.measured["C_weak_levels"] = weak
        rep.measured["weak_stability"] = _stability(weak)
        rep.check("weak_stability", rep.measured["weak_stability"] <= tol["stability"])
    return rep


@timed
def _main_estimate(p, tol, seed, problem):
    specs = problem_specs(problem, CUBE, MAIN_DEFAULTS[p["case"]], p["levels"])
    reps = [estimates.run_main_estimate(s, p["case"], samples=p["samples"], seed=seed) for s in specs]
    rep = _merge_levels("main-estimate", reps, "C_main", tol["stability"])
    rep.check("regression_bound", all(r.measured["C_main"] <= tol["regression_bound"] for r in reps))
    return rep


AVG_DEFAULTS = {"c": {"kind": "constant", "value": [0.5, -0.2, 0.1]}, "d": {"kind": "constant", "value": 1.0},
                "f": {"kind": "expr", "value": "cos(pi*x1) + 0.3"}}


@timed
def _avg_inequality(p, tol, seed, problem):
    specs = problem_specs(problem, CUBE, AVG_DEFAULTS, p["levels"])
    reps = [estimates.run_avg_inequality(s, rtol=tol["rtol"]) for s in specs]
    rep = EstimateReport(name="avg-inequality")
    for r in reps:
        rep.mesh_hashes.extend(r.mesh_hashes)
        rep.series.append(r.measured)
        for c, ok in r.checks.items():
            rep.checks[c] = rep.checks.get(c, True) and ok
    rep.measured = dict(reps[-1].measured)
    return rep


CACC_DEFAULTS = {"d": {"kind": "constant", "value": 1.0}, "b": {"kind": "constant", "value": [0.2, 0.0, -0.1]},
                 "f": {"kind": "expr", "value": "cos(pi*x1)*x2"}}


@timed
def _caccioppoli(p, tol, seed, problem):
    specs = problem_specs(problem, CUBE, CACC_DEFAULTS, p["levels"])
    reps = [estimates.run_caccioppoli(s, p["center"], p["r"]) for s in specs]
    return _merge_levels("caccioppoli", reps, "C", tol["stability"])


POINTWISE_DEFAULTS = {"d": {"kind": "constant", "value": 1.0},
                      "b": {"kind": "expr", "value": ["0.2*x1", "0.2*x2", "0.2*x3"]},
                      "f": {"kind": "expr", "value": "1 + cos(pi*x1)*x2"}}


@timed
def _pointwise(p, tol, seed, problem):
    specs = problem_specs(problem, CUBE, POINTWISE_DEFAULTS, p["levels"])
    reps = [estimates.run_pointwise_suite(s) for s in specs]
    rep = _merge_levels("pointwise", reps, "C_global", tol["stability"])
    for key in ("C_linf", "C_local"):
        vals = [r.measured.get(key) for r in reps]
        if all(v is not None for v in vals):
            rep.measured[f"{key}_stability"] = _stability(vals)
            rep.check(f"{key}_stability", rep.measured[f"{key}_stability"] <= tol["stability"])
    return rep


@timed
def _halfball(p, tol, seed, problem):
    return appendix.counterexample_log_singular("halfball", samples=p["samples"], seed=seed,
                                                residual_tol=tol["residual"], slope_tol=tol["slope"])


@timed
def _cone(p, tol, seed, problem):
    return appendix.counterexample_log_singular("cone", samples=p["samples"], seed=seed,
                                                residual_tol=tol["residual"], slope_tol=tol["slope"])


@timed
def _ds_family(p, tol, seed, problem):
    s_values = [2.0 ** -k for k in p["k_values"]]
    return appendix.counterexample_ds_family(s_values, p["n"], tol["rate"])


# ----------------------------------------------------------------------
# The registry
# ----------------------------------------------------------------------
def _e(name, description, anchor, runner, params=None, tolerances=None, takes_problem=False):
    return Experiment(name, description, anchor, runner, dict(params or {}), dict(tolerances or {}), takes_problem)


EXPERIMENTS = [
    _e("kernel-dim-cube", "Neumann kernel of -Laplace + d on the unit cube: dimension 1 for d = 0, 0 for d = 1",
       "kernel dichotomy for the pure Neumann operator", _kernel_dim_cube, {"k": 8},
       {"gap_min": 10.0, "residual": 1e-10}),
    _e("appendix-eigen-cube", "-Laplace u - u on (0, pi)^3: three near-zero singular values shrinking under refinement",
       "eigenvalue cube counterexample", _eigen_cube, {"levels": [8, 16], "count": 3}, {"shrink_min": 3.0}),
    _e("appendix-1d", "root of f(delta) = 1 and a nonconstant 1-D Neumann kernel",
       "one-dimensional drift counterexample", _one_d, {}, {"f_root": 1e-12, "u_prime": 1e-10}),
    _e("appendix-tensor-kernel", "two-dimensional kernel of -Laplace + c.grad - 2 on (-1, 1)^3",
       "tensor-product kernel counterexample", _tensor_kernel,
       {"delta": None, "k_detect": 12, "k_capture": 16}, {"gap_min": 10.0, "capture_min": 0.99}),
    _e("green-symmetry", "G(x, y) against the adjoint G*(y, x): matched mollifiers and nodal values",
       "Green function symmetry", _green_symmetry, {"k_matched": 8, "levels": [4, 8, 16]}, {"matched": 1e-9}),
    _e("green-scaling", "Green function covariance under dilation of the domain", "Green function scaling",
       _green_scaling, {"k": 8, "r": [0.5, 2.0]}, {"relative": 1e-9}),
    _e("green-pointwise", "sup |x - y|^(n-2) |G| and weak norms of G, grad G and the trace of G",
       "Green function pointwise bound and weak-type norms", _green_pointwise,
       {"levels": [8, 16], "exclusion": 2.0}, {"factor": 1.5, "norm_stability": 0.5}),
    _e("representation", "representation of the adjoint solution through the Green function, and duality",
       "Green representation formula", _representation, {"levels": [4, 8, 16], "pairs": 10},
       {"finest_error": 0.05, "reduction": 2.0, "duality": 1e-9}),
    _e("lorentz-engine", "Lorentz norms of indicators and equimeasurability against L^p norms",
       "Lorentz quasi-norms", _lorentz_engine, {"k": 5, "samples": 10},
       {"indicator": 1e-12, "equimeasurable": 1e-8}),
    _e("splitting", "level splitting of random P1 functions: properties, budgets, piece count",
       "splitting lemma", _splitting, {"k": 6, "samples": 50},
       {"violation": 1e-12, "budget": 1e-10, "mean_zero": 1e-10}),
    _e("scale-invariance", "solution-to-data ratio under dilations of the problem",
       "scale invariance of the estimates", _scale_invariance, {"k": 6, "r": [0.5, 1.0, 2.0, 4.0]},
       {"relative": 1e-9}, takes_problem=True),
    _e("subsolution-rigidity", "with c = d = 0 and compatible data, discrete subsolutions are solutions",
       "subsolutions are solutions", _rigidity, {"k": 4, "samples": 20}, {"sum": 1e-12}),
    _e("appendix-ds-family", "radial family with int d_s -> 0 and exploding gradient energy",
       "blow-up family for vanishing int d", _ds_family, {"k_values": [2, 3, 4, 5, 6, 7], "n": 3}, {"rate": 0.10}),
    _e("condition-checker", "hat-function sign condition: half-space failure, b = 0 pass, cone exactness",
       "sign condition on (b, d)", _condition_checker, {"k": 6, "samples": 100}, {"cone": 1e-12}),
    _e("poincare", "Poincare constants (plain, ample zero set, modified mean) over a random family",
       "Poincare inequalities", _poincare,
       {"variant": "plain", "levels": [4, 8], "samples": 200, "delta": 0.5, "delta0": None},
       {"stability": 0.2}, takes_problem=True),
    _e("trace", "trace inequality in strong and weak boundary norms", "trace inequality", _trace,
       {"p": 2.0, "levels": [4, 8], "samples": 200}, {"stability": 0.2}, takes_problem=True),
    _e("main-estimate", "gradient bound for u+ through the splitting, measured constant",
       "main energy estimate", _main_estimate,
       {"case": "delta_zero", "levels": [4, 8], "samples": 200}, {"stability": 0.5, "regression_bound": 10.0},
       takes_problem=True),
    _e("avg-inequality", "int(c.grad u+ + d u+) against int f+ + int g+", "averaged inequality for u+",
       _avg_inequality, {"levels": [8]}, {"rtol": 1e-8}, takes_problem=True),
    _e("caccioppoli", "local energy against local L^2 norm on balls of radius r/2, r, 2r",
       "Caccioppoli inequality", _caccioppoli, {"center": [0.5, 0.5, 0.5], "r": 0.2, "levels": [4, 8]},
       {"stability": 0.5}, takes_problem=True),
    _e("pointwise", "sup u+ against the mean of u+ and Lorentz norms of the data",
       "pointwise bounds for subsolutions", _pointwise, {"levels": [4, 8]}, {"stability": 0.3},
       takes_problem=True),
    _e("appendix-halfball", "u = ln|x| with grad u + b u = 0 on a half ball", "unbounded solution on a half ball",
       _halfball, {"samples": 10_000}, {"residual": 1e-12, "slope": 0.05}),
    _e("appendix-cone", "u = -ln x_n with grad u + b u = 0 on a cone", "unbounded solution on a cone",
       _cone, {"samples": 10_000}, {"residual": 1e-12, "slope": 0.05}),
]

REGISTRY = {e.name: e for e in EXPERIMENTS}


def get(name: str) -> Experiment:
    try:
        return REGISTRY[name]
    except KeyError:
        raise KeyError(f"unknown experiment {name!r}") from None


def run_experiment(name: str, params=None, tolerances=None, seed: int = 0, problem=None) -> EstimateReport:
    return get(name).run(params, tolerances, seed, problem)
