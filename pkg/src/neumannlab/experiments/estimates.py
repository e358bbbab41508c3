"""Measured constants of the a priori estimates.

Every constant is a lower bound: the maximum of a left/right ratio over the
functions actually tried.  What the experiments assert is the direction of
each inequality (a finite ratio) and its stability under refinement, never a
magnitude.
"""
from __future__ import annotations

import math

import numpy as np

from ..assembly import (ProblemError, ProblemSpec, _sample, _weights, check_sign_condition, integral_d,
                        residual_vector, solve_neumann)
from ..fe import (CoefficientField, FeFunction, TraceFunction, check_ellipticity, gradient_field,
                  lp_norm, mass_lumped, power_integrals)
from ..green import _reference_subdivision
from ..lorentz import weak_norm
from ..mesh import SimplicialMesh
from ..quadrature import simplex_rule
from ..splitting import split_plain
from .report import EstimateReport, timed
from .tools import (ball_rule, cell_average_field, data_lorentz, data_lp, gradient_energy_positive,
                    positive_fraction, positive_integral, random_family, sample_field)

GRAD_FLOOR = 1e-12  # relative; functions with smaller gradients are dropped (0/0)


def sobolev_exponent(n: int, p: float = 2.0) -> float:
    if not p < n:
        raise ProblemError(f"Sobolev exponent needs p < n (p = {p}, n = {n})")
    return n * p / (n - p)


# ----------------------------------------------------------------------
# Poincare-type inequalities
# ----------------------------------------------------------------------
def _modified_mean(u: FeFunction, c_avg: np.ndarray, d_fld, total_d: float) -> float:
    """``int (c.grad u + d u) / int d`` with cellwise ``c`` averages."""
    mesh = u.mesh
    rule = simplex_rule(mesh.n, 4)
    W = _weights(mesh, rule)
    dq = np.asarray(d_fld.at_cells(mesh, rule), dtype=float) if d_fld is not None else 0.0
    uq = u.cell_values() @ rule.points.T
    num = float(np.sum(mesh.volumes * np.einsum("ck,ck->c", c_avg, u.gradients())) + np.sum(W * dq * uq))
    return num / total_d


def ample_zero_set(mesh: SimplicialMesh, delta: float):
    """Cells ``{max_T x_1 <= t}`` with the smallest ``t`` covering ``delta |Omega|``.

    Returns ``(cells, vertices, fraction)``.
    """
    top = mesh.vertices[mesh.cells, 0].max(axis=1)
    order = np.argsort(top, kind="stable")
    cum = np.cumsum(mesh.volumes[order])
    j = int(np.searchsorted(cum, delta * mesh.volume * (1 - 1e-12)))
    t = top[order[min(j, len(order) - 1)]]
    cells = np.nonzero(top <= t)[0]
    verts = np.unique(mesh.cells[cells])
    return cells, verts, float(mesh.volumes[cells].sum() / mesh.volume)


class _PoincareSetup:
    def __init__(self, mesh, variant, delta, c, d, delta0, p):
        self.mesh = mesh
        self.variant = variant
        self.p = p if p is not None else sobolev_exponent(mesh.n)
        self.mass = mass_lumped(mesh)
        self.zero_vertices = None
        self.fraction = None
        if variant == "ample_zero":
            if not 0 < delta <= 1:
                raise ProblemError(f"delta must lie in (0, 1], got {delta}")
            _, self.zero_vertices, self.fraction = ample_zero_set(mesh, delta)
        elif variant == "modified":
            if abs(mesh.volume - 1.0) > 1e-9:
                raise ProblemError(f"modified variant needs |Omega| = 1 (got {mesh.volume:.12g}); rescale the mesh")
            probe = ProblemSpec(mesh, c=c, d=d)
            self.total_d, _ = integral_d(probe)
            d0 = 0.0 if delta0 is None else float(delta0)
            if not self.total_d > 0 or self.total_d < d0:
                raise ProblemError(f"modified variant needs int d >= delta0 > 0 (int d = {self.total_d:.6g}, "
                                   f"delta0 = {d0})")
            self.c_avg = cell_average_field(probe.c, mesh, (mesh.n,))
            self.d = probe.d
        elif variant != "plain":
            raise ProblemError(f"unknown Poincare variant {variant!r}")

    def ratio(self, values: np.ndarray):
        mesh = self.mesh
        if self.zero_vertices is not None:
            values = values.copy()
            values[self.zero_vertices] = 0.0
        u = FeFunction(mesh, values)
        g = lp_norm(gradient_field(u), 2)
        scale = np.abs(values).max() * mesh.volume ** (1 / 2) / mesh.mesh_size
        if g <= GRAD_FLOOR * max(scale, 1e-300):
            return None
        if self.variant == "plain":
            shift = float(self.mass @ values) / mesh.volume
        elif self.variant == "ample_zero":
            shift = 0.0
        else:
            shift = _modified_mean(u, self.c_avg, self.d, self.total_d)
        return lp_norm(u - shift, self.p) / g


def poincare_ratio(u: FeFunction, variant: str = "plain", delta: float = 0.5, c=None, d=None,
                   delta0=None, p: float | None = None):
    """Left/right ratio of one Poincare-type inequality for ``u`` (``None`` if ``grad u = 0``)."""
    return _PoincareSetup(u.mesh, variant, delta, c, d, delta0, p).ratio(u.values)


@timed
def run_poincare(mesh: SimplicialMesh, variant: str = "plain", samples: int = 200, seed: int = 0,
                 delta: float = 0.5, c=None, d=None, delta0=None, p: float | None = None) -> EstimateReport:
    """Largest ``||u - m(u)||_p / ||grad u||_2`` over a random family.

    ``m(u)`` is the mean (``plain``), zero for functions vanishing on a set of
    measure ``>= delta |Omega|`` (``ample_zero``; the family is zeroed there),
    or ``int(c.grad u + d u) / int d`` (``modified``, needs ``|Omega| = 1``).
    """
    setup = _PoincareSetup(mesh, variant, delta, c, d, delta0, p)
    rng = np.random.default_rng(seed)
    best, arg, used = 0.0, None, 0
    for label, v in random_family(mesh, samples, rng):
        r = setup.ratio(v)
        if r is None:
            continue
        used += 1
        if r > best:
            best, arg = r, label
    rep = EstimateReport(name="poincare")
    rep.add_mesh(mesh)
    rep.inputs = {"variant": variant, "samples": samples, "seed": seed, "p": setup.p,
                  "delta": delta if variant == "ample_zero" else None}
    rep.measured = {"C0": best, "argmax": arg, "used": used}
    if setup.fraction is not None:
        rep.measured["zero_fraction"] = setup.fraction
    rep.tolerance = {"grad_floor": GRAD_FLOOR}
    rep.check("finite", math.isfinite(best) and best > 0)
    rep.check("enough_samples", used >= min(samples, 200) * 0.9)
    return rep


# ----------------------------------------------------------------------
# Trace inequality
# ----------------------------------------------------------------------
def trace_ratios(u: FeFunction, p: float = 2.0, weak: bool = True):
    """``(strong, weak)`` ratios of the boundary norm to ``||u||_{p*} + ||grad u||_p``."""
    mesh = u.mesh
    n = mesh.n
    q = p * (n - 1) / (n - p)
    pstar = n * p / (n - p)
    den = lp_norm(u, pstar) + lp_norm(gradient_field(u), p)
    if den == 0:
        return None
    tr = TraceFunction(mesh, np.arange(len(mesh.boundary_facets)), u.values)
    strong = lp_norm(tr, q) / den
    wk = weak_norm(tr, q).value / den if weak else None
    return strong, wk


@timed
def run_trace(mesh: SimplicialMesh, p: float = 2.0, samples: int = 200, seed: int = 0) -> EstimateReport:
    """Largest boundary-to-volume ratio for ``L^{p(n-1)/(n-p)}(boundary)`` and its weak version."""
    n = mesh.n
    if not (1 <= p < n):
        raise ProblemError(f"trace inequality needs 1 <= p < n (p = {p}, n = {n})")
    weak = p > 1
    rng = np.random.default_rng(seed)
    fam = [("constant", np.ones(mesh.n_vertices))] + random_family(mesh, samples, rng)
    best_s, best_w, arg_s, arg_w = 0.0, 0.0, None, None
    one = None
    for label, v in fam:
        r = trace_ratios(FeFunction(mesh, v), p, weak)
        if r is None:
            continue
        if label == "constant":
            one = r
        if r[0] > best_s:
            best_s, arg_s = r[0], label
        if weak and r[1] > best_w:
            best_w, arg_w = r[1], label
    rep = EstimateReport(name="trace")
    rep.add_mesh(mesh)
    q = p * (n - 1) / (n - p)
    rep.inputs = {"p": p, "boundary_exponent": q, "volume_exponent": n * p / (n - p), "samples": samples,
                  "seed": seed}
    rep.measured = {"C_strong": best_s, "argmax_strong": arg_s, "constant_ratio": one[0]}
    if weak:
        rep.measured.update({"C_weak": best_w, "argmax_weak": arg_w, "constant_ratio_weak": one[1]})
    else:
        rep.notes.append("weak (Lorentz) variant needs p > 1; skipped")
    # u = 1: ||1||_{L^q(bdry)} / ||1||_{L^{p*}} = |bdry|^{1/q} / |Omega|^{1/p*}
    closed = mesh.boundary_area ** (1 / q) / mesh.volume ** ((n - p) / (n * p))
    rep.measured["constant_closed_form"] = closed
    rep.tolerance = {"constant_ratio": 1e-12}
    rep.check("constant_ratio", abs(one[0] - closed) <= 1e-12 * closed)
    rep.check("finite", math.isfinite(best_s) and (not weak or math.isfinite(best_w)))
    return rep


# ----------------------------------------------------------------------
# Splitting-based main estimate
# ----------------------------------------------------------------------
def _lambda_of(spec: ProblemSpec) -> float:
    if spec.A is None:
        return 1.0
    if spec.bounds is not None:
        return float(spec.bounds[0])
    return check_ellipticity(spec.A, spec.mesh)["min_eigenvalue"]


def _piece_lp(split, i: int, a: float, p: float, lam, w) -> float:
    """``||u_i - a||_p`` on a composite rule (pieces have kinks inside cells)."""
    u = split.u
    vals = np.matmul(u.cell_values(), lam.T)  # (nc, Q)
    piece = split.piece_of_values(i, vals)
    return float(np.sum(u.mesh.volumes * (np.abs(piece - a) ** p @ w)) ** (1 / p))


def _drift_h(spec: ProblemSpec):
    """``|b - c|`` as cell averages (exact for constant and cellwise fields)."""
    mesh = spec.mesh
    b = cell_average_field(spec.b, mesh, (mesh.n,))
    c = cell_average_field(spec.c, mesh, (mesh.n,))
    from ..fe import P0Field
    return P0Field(mesh, np.linalg.norm(b - c, axis=1), name="|b-c|")


def _pieces_a(split, case: str, spec: ProblemSpec, total_d: float) -> np.ndarray:
    mesh = spec.mesh
    N = split.N
    vol = mesh.volume
    if case == "delta_zero":
        return np.array([split.piece_integral(i) / vol for i in range(N)])
    c_avg = cell_average_field(spec.c, mesh, (mesh.n,))
    d_avg = cell_average_field(spec.d, mesh)
    grad = split.u.gradients()
    cg = np.einsum("ck,ck->c", c_avg, grad)
    out = np.empty(N)
    for i in range(N):
        out[i] = (float(np.sum(split.band_measures(i, cg))) + float(d_avg @ split.piece_cell_integrals(i))) / total_d
    return out


def _check_case(spec: ProblemSpec, case: str):
    total, delta0 = integral_d(spec)
    if case == "delta_zero":
        if spec.has("d"):
            raise ProblemError("delta_zero case needs d = 0")
        if spec.has("b") and spec.has("c"):
            raise ProblemError("delta_zero case needs b = 0 or c = 0 (pure divergence or pure drift form)")
        return total, delta0, None
    if case != "delta_positive":
        raise ProblemError(f"unknown case {case!r}; expected 'delta_zero' or 'delta_positive'")
    if not delta0 > 0:
        raise ProblemError(f"delta_positive case needs |Omega|^(2/n-1) int d > 0 (got {delta0:.6g})")
    bd = check_sign_condition(spec, "bd")
    cd = check_sign_condition(spec, "cd")
    if not (bd.holds or cd.holds):
        raise ProblemError(f"neither sign condition holds (b-pair min {bd.min_value:.3e}, "
                           f"c-pair min {cd.min_value:.3e})")
    return total, delta0, {"bd": bd.holds, "cd": cd.holds}


@timed
def run_main_estimate(spec: ProblemSpec, case: str = "delta_zero", C0: float | None = None,
                      samples: int = 200, seed: int = 0, subdivision: int = 3, u: FeFunction | None = None,
                      max_rounds: int = 6) -> EstimateReport:
    """Both sides of the splitting estimate and of the Y-norm estimate.

    The solution ``u`` (or the given discrete subsolution) is split on ``u+``
    with ``h = |b - c|`` and ``eps = lambda / (8 C0)``.  ``C0`` starts as the
    measured Poincare constant (plain for ``delta_zero``, the family maximum of
    ``||v - a(v)|| / ||grad v||`` with the ``delta_positive`` averages
    otherwise) and is raised to the largest piece ratio until the relation
    ``||u_i - a_i|| <= C0 ||grad u_i||`` holds for every piece.

    The a-term enters as ``||a||_{L^{2n/(n-2)}(Omega)}^2`` so the measured
    constant is invariant under dilation; the bare ``a^2`` is reported too.
    """
    mesh = spec.mesh
    n = mesh.n
    if n < 3:
        raise ProblemError("the estimate is stated for n >= 3")
    total, delta0, conds = _check_case(spec, case)
    lam_ell = _lambda_of(spec)
    if u is None:
        sol = solve_neumann(spec)
        u = sol.u
    res = residual_vector(spec, u)
    if res.kind not in ("solution", "subsolution"):
        raise ProblemError(f"u is not a discrete subsolution (residual kind {res.kind})")
    p = sobolev_exponent(n)
    vol = mesh.volume
    rep = EstimateReport(name="main-estimate")
    rep.add_mesh(mesh)
    rep.inputs = {"case": case, "lambda": lam_ell, "samples": samples, "seed": seed, "residual_kind": res.kind,
                  "int_d": total, "delta0": delta0, "conditions": conds}

    h = _drift_h(spec)
    if C0 is None:
        if case == "delta_zero":
            C0 = run_poincare(mesh, "plain", samples=samples, seed=seed).measured["C0"]
        else:
            C0 = _family_modified_constant(spec, total, samples, seed)
    C0_start = C0
    lam, w = _reference_subdivision(n, subdivision)
    upos = positive_integral(u)
    if upos == 0.0:
        split, a, rel, x = None, np.zeros(0), np.zeros(0), np.zeros(0)
        eps = min(lam_ell / 8, lam_ell / (8 * C0))
    else:
        for _ in range(max_rounds):
            eps = min(lam_ell / 8, lam_ell / (8 * C0))
            split = split_plain(u, h, eps, side="positive")
            a = _pieces_a(split, case, spec, total)
            x = np.array([split.piece_gradient_norm(i) for i in range(split.N)])
            rel = np.array([_piece_lp(split, i, a[i], p, lam, w) / x[i] if x[i] > 0 else 0.0
                            for i in range(split.N)])
            if rel.max(initial=0.0) <= C0:
                break
            C0 = float(rel.max()) * (1 + 1e-9)
    lhs = gradient_energy_positive(u)
    fplus = data_lp(spec, "f", 2 * n / (n + 2), positive=True)
    gplus = data_lp(spec, "g", 2 - 2 / n, positive=True)
    Fn = data_lp(spec, "F", 2.0)
    a_sum = float(np.sum(a))
    a_term = a_sum ** 2 * vol ** ((n - 2) / n)
    rhs = a_term + fplus ** 2 + gplus ** 2 + Fn ** 2
    C_main = lhs / rhs if rhs > 0 else (0.0 if lhs <= 1e-300 else math.inf)

    # Y-norm estimate
    y_left = lp_norm(u, p, positive=True) + math.sqrt(lhs)
    if case == "delta_zero":
        y_right = fplus + Fn + gplus + vol ** (-(n + 2) / (2 * n)) * upos
    else:
        y_left_full = lp_norm(u, p) + lp_norm(gradient_field(u), 2)
        y_right_full = (data_lp(spec, "f", 2 * n / (n + 2)) + Fn + data_lp(spec, "g", 2 - 2 / n))
        rep.measured["C_Y_solution"] = y_left_full / y_right_full if y_right_full > 0 else 0.0
        y_right = fplus + Fn + gplus + a_sum * vol ** ((n - 2) / (2 * n))
    C_Y = y_left / y_right if y_right > 0 else (0.0 if y_left <= 1e-300 else math.inf)

    rep.measured.update({
        "C_main": C_main, "C_Y": C_Y, "lhs": lhs, "rhs": rhs, "a": a_sum, "a_squared": a_sum ** 2,
        "a_term": a_term, "f_plus": fplus, "g_plus": gplus, "F": Fn, "eps": eps, "C0": C0,
        "C0_family": C0_start, "N": 0 if split is None else split.N,
        "piece_gradient_norms": x.tolist(), "a_i": a.tolist(), "relation_ratios": rel.tolist(),
        "h_norm_n": 0.0 if split is None else split.h_norm_n,
    })
    rep.tolerance = {"C0_eps": 1e-12}
    rep.check("finite", math.isfinite(C_main) and math.isfinite(C_Y))
    rep.check("relation", rel.max(initial=0.0) <= C0)
    rep.check("eps_choice", C0 * eps <= lam_ell / 8 * (1 + 1e-12) and eps <= lam_ell / 8 * (1 + 1e-12))
    if split is not None:
        rep.check("piece_count", split.N <= split.bound + 1e-9)
    return rep


def _family_modified_constant(spec: ProblemSpec, total_d: float, samples: int, seed: int) -> float:
    mesh = spec.mesh
    c_avg = cell_average_field(spec.c, mesh, (mesh.n,))
    p = sobolev_exponent(mesh.n)
    best = 0.0
    for _, v in random_family(mesh, samples, np.random.default_rng(seed)):
        u = FeFunction(mesh, v)
        g = lp_norm(gradient_field(u), 2)
        if g <= GRAD_FLOOR * np.abs(v).max():
            continue
        m = _modified_mean(u, c_avg, spec.d, total_d)
        best = max(best, lp_norm(u - m, p) / g)
    return best


# ----------------------------------------------------------------------
# Averaged inequality for subsolutions
# ----------------------------------------------------------------------
@timed
def run_avg_inequality(spec: ProblemSpec, u: FeFunction | None = None, rtol: float = 1e-8) -> EstimateReport:
    """``int (c.grad u+ + d u+)`` against ``int f+ + int_Gamma g+`` (``F = 0`` only).

    The left side is evaluated with cell averages of ``c`` and ``d`` times the
    exact measures of ``{u > 0}`` in each cell, so it is exact for cellwise
    constant coefficients.
    """
    if spec.has("F"):
        raise ProblemError("the averaged inequality excludes the F term (the argument does not carry over "
                           "to divergence data); set F = 0")
    mesh = spec.mesh
    if u is None:
        u = solve_neumann(spec).u
    res = residual_vector(spec, u)
    if res.kind not in ("solution", "subsolution"):
        raise ProblemError(f"u is not a discrete subsolution (residual kind {res.kind})")
    c_avg = cell_average_field(spec.c, mesh, (mesh.n,))
    d_avg = cell_average_field(spec.d, mesh)
    frac = positive_fraction(u)
    cg = np.einsum("ck,ck->c", c_avg, u.gradients())
    upos_cells = power_integrals(u.cell_values(), mesh.volumes, 1.0, positive=True)
    lhs = float(np.sum(cg * frac * mesh.volumes) + d_avg @ upos_cells)
    fplus = data_lp(spec, "f", 1.0, positive=True)
    gplus = data_lp(spec, "g", 1.0, positive=True)
    rhs = fplus + gplus
    scale = abs(lhs) + rhs + float(np.abs(d_avg) @ np.abs(upos_cells))
    rep = EstimateReport(name="avg-inequality")
    rep.add_mesh(mesh)
    rep.inputs = {"residual_kind": res.kind}
    rep.measured = {"lhs": lhs, "rhs": rhs, "margin": rhs - lhs}
    rep.tolerance = {"rtol": rtol}
    rep.check("inequality", lhs <= rhs + rtol * scale)
    return rep


# ----------------------------------------------------------------------
# Caccioppoli
# ----------------------------------------------------------------------
def caccioppoli_terms(spec: ProblemSpec, u: FeFunction, center, r: float, subdivision: int = 4) -> dict:
    mesh = spec.mesh
    n = mesh.n
    cells, lam, w = ball_rule(mesh, center, r, subdivision)
    g2 = np.sum(u.gradients()[cells] ** 2, axis=1)
    left = float(np.sum(g2 * w.sum(axis=1)))
    cells2, lam2, w2 = ball_rule(mesh, center, 2 * r, subdivision)
    uq = np.einsum("cqi,ci->cq", lam2, u.values[mesh.cells[cells2]])
    u2 = float(np.sum(w2 * uq ** 2))
    F2 = 0.0
    if spec.has("F"):
        Fq = sample_field(spec.F, mesh, cells2, lam2, (n,))
        F2 = float(np.sum(w2 * np.sum(Fq ** 2, axis=2)))
    fq_norm = 0.0
    if spec.has("f"):
        pf = 2 * n / (n + 2)
        fq = sample_field(spec.f, mesh, cells2, lam2)
        fq_norm = float(np.sum(w2 * np.abs(fq) ** pf)) ** (1 / pf)
    return {"left": left, "u2": u2, "F2": F2, "f_norm": fq_norm,
            "right": u2 / r ** 2 + F2 + fq_norm ** 2}


@timed
def run_caccioppoli(spec: ProblemSpec, center, r: float, u: FeFunction | None = None,
                    subdivision: int = 4) -> EstimateReport:
    """``int_{B_r} |grad u|^2`` against ``r^-2 int_{B_2r} u^2 + ||F||^2 + ||f||^2``
    for ``r`` in ``{r0/2, r0, 2 r0}`` (radii with ``2r > diam`` are skipped)."""
    mesh = spec.mesh
    if abs(mesh.volume - 1.0) > 1e-9:
        raise ProblemError(f"Caccioppoli experiment needs |Omega| = 1 (got {mesh.volume:.12g})")
    center = np.asarray(center, dtype=float)
    lo, hi = mesh.vertices.min(axis=0), mesh.vertices.max(axis=0)
    if np.any(center < lo) or np.any(center > hi):
        raise ProblemError(f"ball centre {center.tolist()} lies outside the mesh bounding box")
    diam = float(np.linalg.norm(hi - lo))
    if not (r > 0 and 2 * r <= diam):
        raise ProblemError(f"need 0 < 2r <= diam(Omega) = {diam:.6g} (r = {r})")
    if u is None:
        u = solve_neumann(spec).u
    rep = EstimateReport(name="caccioppoli")
    rep.add_mesh(mesh)
    rep.inputs = {"center": center.tolist(), "r0": r, "subdivision": subdivision}
    ratios = []
    for rr in (r / 2, r, 2 * r):
        if 2 * rr > diam:
            rep.notes.append(f"radius {rr:g} skipped: 2r exceeds the diameter")
            continue
        t = caccioppoli_terms(spec, u, center, rr, subdivision)
        ratio = t["left"] / t["right"] if t["right"] > 0 else (0.0 if t["left"] <= 1e-300 else math.inf)
        rep.series.append(dict(r=rr, ratio=ratio, **t))
        ratios.append(ratio)
    rep.measured = {"C": max(ratios), "ratios": ratios}
    rep.check("finite", all(math.isfinite(x) for x in ratios))
    return rep


# ----------------------------------------------------------------------
# Pointwise bounds
# ----------------------------------------------------------------------
@timed
def run_pointwise_suite(spec: ProblemSpec, u: FeFunction | None = None, local_r: float | None = None
                        ) -> EstimateReport:
    """Sup bounds in Lorentz data norms.

    * global: ``sup u+`` against ``avg u+ + ||F||_{L^{n,1}} + ||f+||_{L^{n/2,1}}
      + ||g+||_{L^{n-1,1}(boundary)}``;
    * ``||u||_inf`` against ``||f||_{L^{n/2,1}}`` when ``F = g = 0`` and
      ``delta0 > 0``;
    * on graph-domain meshes, the boundary-local bound around the origin with
      the enlarged ball ``B_{6(M+1)r}``.

    Data enter through their cell (facet) averages.
    """
    mesh = spec.mesh
    n = mesh.n
    bd = check_sign_condition(spec, "bd")
    if not bd.holds:
        raise ProblemError(f"pointwise bounds need the b-pair sign condition (min hat value {bd.min_value:.3e})")
    total, delta0 = integral_d(spec)
    if u is None:
        u = solve_neumann(spec).u
    rep = EstimateReport(name="pointwise")
    rep.add_mesh(mesh)
    sup_pos = float(max(u.values.max(), 0.0))
    avg_pos = positive_integral(u) / mesh.volume
    Fl = data_lorentz(spec, "F", n, 1)
    fl = data_lorentz(spec, "f", n / 2, 1, positive=True)
    gl = data_lorentz(spec, "g", n - 1, 1, positive=True)
    right = avg_pos + Fl + fl + gl
    C_global = sup_pos / right if right > 0 else (0.0 if sup_pos <= 1e-300 else math.inf)
    rep.measured = {"sup_u_plus": sup_pos, "avg_u_plus": avg_pos, "F_n1": Fl, "f_plus_n21": fl,
                    "g_plus_n11": gl, "C_global": C_global, "int_d": total, "delta0": delta0}
    finite = [C_global]
    if delta0 > 0 and not spec.has("F") and not spec.has("g"):
        f_full = data_lorentz(spec, "f", n / 2, 1)
        sup_abs = float(np.abs(u.values).max())
        C_linf = sup_abs / f_full if f_full > 0 else (0.0 if sup_abs <= 1e-300 else math.inf)
        rep.measured.update({"sup_abs_u": sup_abs, "f_n21": f_full, "C_linf": C_linf})
        finite.append(C_linf)
    if mesh.graph is not None:
        loc = _boundary_local(spec, u, local_r)
        rep.measured.update(loc)
        finite.append(loc["C_local"])
    rep.check("finite", all(math.isfinite(x) for x in finite))
    return rep


def _boundary_local(spec: ProblemSpec, u: FeFunction, r: float | None) -> dict:
    from ..fe import P0Field, lp_norm as _lp, reflect_cell_field
    from ..mesh import reflect_mesh

    mesh = spec.mesh
    n = mesh.n
    M = mesh.graph.spec.M
    R = mesh.graph.spec.r
    if r is None:
        r = R / (6 * (M + 1))
    q = np.zeros(n)
    cen = mesh.centroids
    small = np.nonzero(np.linalg.norm(mesh.vertices - q, axis=1) < r)[0]
    big_r = 6 * (M + 1) * r
    big = np.nonzero(np.linalg.norm(cen - q, axis=1) < big_r)[0]
    sup_loc = float(max(u.values[small].max(initial=0.0), 0.0))
    avg_loc = positive_integral(u, big) / float(mesh.volumes[big].sum())
    Fl = data_lorentz(spec, "F", n, 1, cells=big)
    fl = data_lorentz(spec, "f", n / 2, 1, positive=True, cells=big)
    right = avg_loc + Fl + fl
    C_local = sup_loc / right if right > 0 else (0.0 if sup_loc <= 1e-300 else math.inf)
    # the constant is governed by ||b - c||_n; record it on the domain and on
    # the reflected double used by the boundary argument
    bc = cell_average_field(spec.b, mesh, (n,)) - cell_average_field(spec.c, mesh, (n,))
    bc_norm = _lp(P0Field(mesh, bc), n)
    refl = reflect_mesh(mesh)
    bc_refl = reflect_cell_field(bc, refl, "b")
    bc_refl_norm = _lp(P0Field(refl, bc_refl), n)
    return {"local_r": r, "local_big_r": big_r, "sup_local": sup_loc, "avg_local": avg_loc,
            "C_local": C_local, "b_minus_c_n": bc_norm, "b_minus_c_n_reflected": bc_refl_norm}
