"""Constructive splitting of a P1 function into pieces with small weight.

Given ``u``, a cellwise weight ``h`` and ``eps > 0``, the levels
``M = s_0 > s_1 > ... > s_N = 0`` are chosen so that each band
``Omega_i = {s_i < u <= s_{i-1}, grad u != 0}`` carries exactly
``int_{Omega_i} |h|^n = eps^n`` (the last band at most that).  Pieces are
clamps ``u_i = clamp(u, s_i, s_{i-1}) - s_i``, so ``sum u_i`` telescopes back
to ``u`` and ``grad u_i`` lives on ``Omega_i``.

The mean-zero variant pairs every positive level ``l`` with a negative
threshold ``k_l`` balancing ``int_{u>l}(u-l) = int_{u<k_l}(k_l-u)`` and adds
the band ``{k_t <= u < k_s}`` to ``Omega(s,t)``; each piece then has zero
mean:

    u_{s,t} = (u-s)_+ - (u-t)_+ - (k_s-u)_+ + (k_t-u)_+.

All band measures and moments come from exact simplex slicing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .fe import FeFunction, P0Field, as_field, cell_integrals, lp_norm
from .levelset import SimplexValues

ACTIVE_TOL = 1e-13


class SplitError(ValueError):
    pass


def _h_cells(u: FeFunction, h) -> np.ndarray:
    """Cell averages of ``|h|^n`` (exact for P0 input)."""
    mesh = u.mesh
    n = mesh.n
    if h is None:
        return np.zeros(mesh.n_cells)
    if isinstance(h, P0Field):
        return h.magnitude() ** n
    if np.isscalar(h):
        return np.full(mesh.n_cells, abs(float(h)) ** n)
    fld = as_field(h, shape=())
    if fld.kind == "analytic":
        mag = lambda X: np.abs(np.asarray(fld.value(X), dtype=float)) ** n  # noqa: E731
        return cell_integrals(mesh, mag, 8) / mesh.volumes
    avg = np.asarray(fld.cell_average(mesh))
    return (np.abs(avg) if avg.ndim == 1 else np.linalg.norm(avg, axis=1)) ** n


@dataclass
class SplitResult:
    """Levels, thresholds and band bookkeeping of a split.

    ``mode`` is ``"positive"`` (split of ``u+``), ``"both"`` (levels of
    ``|u|``, signed pieces) or ``"mean_zero"``.
    """

    u: FeFunction
    eps: float
    mode: str
    levels: np.ndarray
    thresholds: np.ndarray | None
    active: np.ndarray
    h_cell: np.ndarray
    budgets: np.ndarray
    h_total: float
    h_norm_n: float
    slack: float = 0.0
    stats: SimplexValues = field(repr=False, default=None)

    @property
    def N(self) -> int:
        return len(self.levels) - 1

    @property
    def bound(self) -> float:
        """``1 + (||h||_n / eps)^n``."""
        return 1.0 + (self.h_norm_n / self.eps) ** self.u.mesh.n

    # -- pieces as functions of the value of u -------------------------
    def piece_of_values(self, i: int, val: np.ndarray) -> np.ndarray:
        s, t = self.levels[i + 1], self.levels[i]
        if self.mode == "positive":
            return np.clip(val, s, t) - s
        if self.mode == "both":
            return np.sign(val) * (np.clip(np.abs(val), s, t) - s)
        ks, kt = self.thresholds[i + 1], self.thresholds[i]
        return (np.maximum(val - s, 0) - np.maximum(val - t, 0)
                - np.maximum(ks - val, 0) + np.maximum(kt - val, 0))

    def in_band(self, i: int, val: np.ndarray) -> np.ndarray:
        s, t = self.levels[i + 1], self.levels[i]
        if self.mode == "positive":
            return (val > s) & (val <= t)
        if self.mode == "both":
            a = np.abs(val)
            return (a > s) & (a <= t)
        ks, kt = self.thresholds[i + 1], self.thresholds[i]
        return ((val > s) & (val <= t)) | ((val >= kt) & (val < ks))

    def target_of_values(self, val: np.ndarray) -> np.ndarray:
        return np.maximum(val, 0.0) if self.mode == "positive" else val

    # -- exact integrals ----------------------------------------------
    def band_measures(self, i: int, weights: np.ndarray | None = None) -> np.ndarray:
        """Per-cell ``|Omega_i cap T|`` times ``weights`` (default 1)."""
        S = self.stats
        w = self.active * self.u.mesh.volumes * (1.0 if weights is None else weights)
        return w * _band_fraction(S, self.mode, self.levels[i + 1], self.levels[i],
                                  None if self.thresholds is None else self.thresholds[i + 1],
                                  None if self.thresholds is None else self.thresholds[i])

    def piece_cell_integrals(self, i: int) -> np.ndarray:
        """Per-cell ``int_T u_i``."""
        S = self.stats
        vol = self.u.mesh.volumes
        s, t = self.levels[i + 1], self.levels[i]

        def above(x, st):
            return st.mean_values() - x + st.lower_moment(x)

        out = above(s, S) - above(t, S)
        if self.mode == "both":
            Sm = S.negated()
            out -= above(s, Sm) - above(t, Sm)
        elif self.mode == "mean_zero":
            ks, kt = self.thresholds[i + 1], self.thresholds[i]
            out += -S.lower_moment(ks) + S.lower_moment(kt)
        return out * vol

    def piece_integral(self, i: int) -> float:
        return float(math.fsum(self.piece_cell_integrals(i)))

    def piece_gradient_norm(self, i: int) -> float:
        """``||grad u_i||_{L^2} = (int_{Omega_i} |grad u|^2)^{1/2}``."""
        g2 = np.sum(self.u.gradients() ** 2, axis=1)
        return float(np.sqrt(np.sum(self.band_measures(i, g2))))

    def to_dict(self) -> dict:
        return {
            "mode": self.mode, "eps": self.eps, "N": self.N,
            "levels": [float(x) for x in self.levels],
            "thresholds": None if self.thresholds is None else [float(x) for x in self.thresholds],
            "budgets": [float(x) for x in self.budgets],
            "h_total": self.h_total, "bound": self.bound, "slack": self.slack,
        }


def _band_fraction(S: SimplexValues, mode, s, t, ks=None, kt=None) -> np.ndarray:
    """Per-cell fraction of ``Omega(s, t)`` (without the activity mask)."""
    frac = S.cdf_all(t) - S.cdf_all(s)
    if mode == "both":
        frac = frac + S.cdf_all(-s) - S.cdf_all(-t)
    elif mode == "mean_zero":
        frac = frac + S.cdf_all(ks) - S.cdf_all(kt)
    return frac


def _setup(u: FeFunction, h):
    mesh = u.mesh
    grad = np.linalg.norm(u.gradients(), axis=1)
    gmax = grad.max() if grad.size else 0.0
    active = (grad > ACTIVE_TOL * gmax).astype(float) if gmax > 0 else np.zeros(mesh.n_cells)
    hc = _h_cells(u, h)
    S = SimplexValues(u.cell_values(), mesh.volumes)
    return S, active, hc


def _piece_count(total: float, eps_n: float) -> int:
    if eps_n <= 0:
        raise SplitError("eps must be positive")
    ratio = total / eps_n
    return max(1, math.ceil(ratio - 1e-9))


def _mean_check(u: FeFunction):
    l1 = lp_norm(u, 1)
    mean = float(math.fsum(u.cell_values().mean(axis=1) * u.mesh.volumes))
    if abs(mean) > 1e-12 * max(l1, 1e-300):
        raise SplitError(f"u is not mean-zero: int u = {mean:.3e} (||u||_1 = {l1:.3e})")
    return l1


def threshold_k(u: FeFunction, l: float, stats: SimplexValues | None = None,
                check_mean: bool = True) -> float:
    """``k_l`` in ``[m, 0]`` with ``int_{u>l}(u-l) = int_{u<k_l}(k_l-u)``."""
    S = stats or SimplexValues(u.cell_values(), u.mesh.volumes)
    l1 = _mean_check(u) if check_mean else None
    m, M = float(u.values.min()), float(u.values.max())
    if l < 0:
        raise SplitError("level must be nonnegative")
    if l >= M:
        return m
    target = S.integral_above(l)
    g = lambda k: S.integral_below(k) - target  # noqa: E731
    g0 = g(0.0)
    if g0 <= 0:
        return 0.0
    k = brentq(g, m, 0.0, xtol=1e-16 * max(abs(m), 1e-300), rtol=4 * np.finfo(float).eps, maxiter=500)
    if l1 is not None and abs(g(k)) > 1e-12 * l1:
        raise SplitError(f"threshold residual {abs(g(k)):.3e} too large")
    return float(k)


def _solve_levels(H, M: float, total: float, eps_n: float):
    """Levels ``s_0 = M > ... > s_N = 0`` with ``H(s_i, s_{i-1}) = eps^n``."""
    N = _piece_count(total, eps_n)
    levels = [M]
    budgets = []
    t = M
    for _ in range(N - 1):
        phi = lambda s, t=t: H(s, t) - eps_n  # noqa: E731
        if phi(0.0) <= 0:
            break
        s = brentq(phi, 0.0, t, xtol=1e-15 * M, rtol=4 * np.finfo(float).eps, maxiter=500)
        budgets.append(H(s, t))
        levels.append(s)
        t = s
    budgets.append(H(0.0, t))
    levels.append(0.0)
    return np.asarray(levels), np.asarray(budgets)


def split_plain(u: FeFunction, h, eps: float, side: str = "positive") -> SplitResult:
    """Split ``u+`` (``side="positive"``) or ``u`` by levels of ``|u|``."""
    if not eps > 0:
        raise SplitError("eps must be positive")
    if side not in ("positive", "both"):
        raise SplitError(f"unknown side {side!r}")
    S, active, hc = _setup(u, h)
    w = active * hc * u.mesh.volumes
    n = u.mesh.n
    M = float(u.values.max()) if side == "positive" else float(np.abs(u.values).max())
    M = max(M, 0.0)

    def H(s, t):
        return float(w @ _band_fraction(S, side, s, t))

    h_norm = float(np.sum(hc * u.mesh.volumes)) ** (1 / n)
    total = H(0.0, M) if M > 0 else 0.0
    eps_n = eps ** n
    if M <= 0:
        levels, budgets = np.array([0.0, 0.0]), np.array([0.0])
    else:
        levels, budgets = _solve_levels(H, M, total, eps_n)
    return SplitResult(u=u, eps=eps, mode=side, levels=levels, thresholds=None, active=active,
                       h_cell=hc, budgets=budgets, h_total=total, h_norm_n=h_norm, stats=S)


def split_mean_zero(u: FeFunction, h, eps: float) -> SplitResult:
    """Split a mean-zero ``u`` into mean-zero pieces."""
    if not eps > 0:
        raise SplitError("eps must be positive")
    _mean_check(u)
    S, active, hc = _setup(u, h)
    w = active * hc * u.mesh.volumes
    n = u.mesh.n
    M, m = float(u.values.max()), float(u.values.min())
    cache: dict[float, float] = {}

    def k_of(l):
        if l not in cache:
            cache[l] = threshold_k(u, l, S, check_mean=False)
        return cache[l]

    def H(s, t):
        return float(w @ _band_fraction(S, "mean_zero", s, t, k_of(s), k_of(t)))

    h_norm = float(np.sum(hc * u.mesh.volumes)) ** (1 / n)
    eps_n = eps ** n
    if M <= 0:
        levels, budgets = np.array([0.0, 0.0]), np.array([0.0])
        ks = np.array([m, 0.0])
        total = 0.0
    else:
        total = H(0.0, M)
        levels, budgets = _solve_levels(H, M, total, eps_n)
        ks = np.array([m] + [k_of(s) for s in levels[1:]])
    return SplitResult(u=u, eps=eps, mode="mean_zero", levels=levels, thresholds=ks, active=active,
                       h_cell=hc, budgets=budgets, h_total=total, h_norm_n=h_norm, stats=S)


# ----------------------------------------------------------------------
# Verification
# ----------------------------------------------------------------------
@dataclass
class SplitReport:
    violations: dict
    budget_error: float
    disjointness: float
    piece_means: list
    N: int
    bound: float

    @property
    def worst(self) -> float:
        return max(self.violations.values())

    @property
    def bound_ok(self) -> bool:
        return self.N <= self.bound + 1e-9


def verify_split(result: SplitResult, samples: int = 1000, seed: int = 0) -> SplitReport:
    """Check properties (a)-(h) pointwise at random points and per cell."""
    rng = np.random.default_rng(seed)
    u = result.u
    mesh = u.mesh
    N = result.N
    cells = np.concatenate([np.arange(mesh.n_cells), rng.integers(0, mesh.n_cells, samples)])
    lam = rng.dirichlet(np.ones(mesh.n + 1), size=len(cells))
    val = np.einsum("pi,pi->p", lam, u.values[mesh.cells[cells]])
    grad = u.gradients()[cells] * result.active[cells, None]
    scale = max(np.abs(u.values).max(), 1e-300)
    gscale = max(np.linalg.norm(u.gradients(), axis=1).max(), 1e-300)

    U = np.stack([result.piece_of_values(i, val) for i in range(N)])
    band = np.stack([result.in_band(i, val) for i in range(N)])
    # slope of each piece as a function of u, by a symmetric difference
    delta = 1e-7 * scale
    slope = np.stack([(result.piece_of_values(i, val + delta) - result.piece_of_values(i, val - delta))
                      / (2 * delta) for i in range(N)])
    Gi = band[..., None] * grad[None]
    target = result.target_of_values(val)
    tgrad = grad * (np.abs(slope.sum(axis=0)) > 0.5)[:, None]

    v = {}
    # (b)/(c): derivative of the clamp formula is the band indicator
    near_kink = np.zeros_like(band)
    for i in range(N):
        for lev in (result.levels[i], result.levels[i + 1]):
            near_kink[i] |= np.abs(np.abs(val) - lev) < 4 * delta if result.mode == "both" \
                else np.abs(val - lev) < 4 * delta
        if result.thresholds is not None:
            for lev in (result.thresholds[i], result.thresholds[i + 1]):
                near_kink[i] |= np.abs(val - lev) < 4 * delta
    # slopes are exactly 0 or 1 away from kinks; round off the difference error
    mism = np.abs(np.where(near_kink, 0.0, np.rint(slope) - band))
    v["b_support"] = float(np.max(np.where(~band, mism, 0.0), initial=0.0))
    v["c_gradient"] = float(np.max(np.where(band, mism, 0.0), initial=0.0))
    v["d_bounded"] = float(np.max(np.abs(U) - np.abs(target)[None], initial=0.0)) / scale
    v["e_sign"] = float(np.max(-(U * target[None]), initial=0.0)) / scale ** 2
    v["f_sum"] = float(np.max(np.abs(U.sum(axis=0) - target), initial=0.0)) / scale
    g_err, h_err = 0.0, 0.0
    csum = np.cumsum(Gi, axis=0)
    tail = np.cumsum(U[::-1], axis=0)[::-1]
    for i in range(N):
        lhs = U[i][:, None] * tgrad
        rhs = U[i][:, None] * csum[i]
        g_err = max(g_err, float(np.max(np.abs(lhs - rhs), initial=0.0)))
        lhs = target[:, None] * Gi[i]
        rhs = tail[i][:, None] * Gi[i]
        h_err = max(h_err, float(np.max(np.abs(lhs - rhs), initial=0.0)))
    v["g_identity"] = g_err / (scale * gscale)
    v["h_identity"] = h_err / (scale * gscale)

    # (a) budgets and disjointness
    eps_n = result.eps ** mesh.n
    budget_err = 0.0
    for i in range(N):
        b = float(np.sum(result.band_measures(i, result.h_cell)))
        if i < N - 1:
            budget_err = max(budget_err, abs(b - eps_n) / eps_n)
        else:
            budget_err = max(budget_err, max(b - eps_n, 0.0) / eps_n)
    disjoint = 0.0
    S = result.stats
    ints = []
    for i in range(N):
        lo, hi = result.levels[i + 1], result.levels[i]
        ints.append((lo, hi))
        if result.mode == "both":
            ints.append((-hi, -lo))
        if result.thresholds is not None:
            ints.append((result.thresholds[i], result.thresholds[i + 1]))
    for a in range(len(ints)):
        for b in range(a + 1, len(ints)):
            lo = max(ints[a][0], ints[b][0])
            hi = min(ints[a][1], ints[b][1])
            if hi > lo:
                disjoint = max(disjoint, float(result.active @ (S.W * (S.cdf_all(hi) - S.cdf_all(lo)))))
    v["a_budget"] = budget_err
    l1 = lp_norm(u, 1)
    means = [result.piece_integral(i) / l1 for i in range(N)] if result.mode == "mean_zero" else []
    return SplitReport(violations=v, budget_error=budget_err, disjointness=disjoint,
                       piece_means=means, N=N, bound=result.bound)
