"""Exact level-set geometry of affine functions on simplices.

For ``u`` affine on a k-simplex with sorted vertex values ``v_0 <= ... <= v_k``
the cell distribution ``F(x) = |{u <= x}| / |T|`` obeys the recursion

    F(x; v_0..v_k) = ((x - v_0) F(x; v_0..v_{k-1})
                      + (v_k - x) F(x; v_1..v_k)) / (v_k - v_0)

with ``F(x; v) = [x >= v]`` for a single value.  Both weights are
nonnegative on ``[v_0, v_k]``, so the evaluation is stable, and tied values
need no special casing.  Between consecutive vertex values ``F`` is a
polynomial of degree ``k``, which makes Gauss--Legendre integration of ``F``
exact and gives exact partial moments ``E[(x - u)_+] = int_{-inf}^x F``.
"""
from __future__ import annotations

import numpy as np

from .quadrature import gauss_legendre01

_CHUNK = 2_000_000


def cell_cdf(V: np.ndarray, x: np.ndarray) -> np.ndarray:
    """``P(u <= x)`` for each row of sorted vertex values ``V`` at ``x``."""
    V = np.asarray(V, dtype=float)
    x = np.asarray(x, dtype=float)
    k = V.shape[1] - 1
    prev = [(x >= V[:, i]).astype(float) for i in range(k + 1)]
    with np.errstate(divide="ignore", invalid="ignore"):
        for L in range(1, k + 1):
            cur = []
            for i in range(k + 1 - L):
                lo, hi = V[:, i], V[:, i + L]
                den = hi - lo
                # convex form; the raw ((x-lo) F_i + (hi-x) F_{i+1}) / den
                # cancels badly for nearly equal knots
                t = np.clip((x - lo) / den, 0.0, 1.0)
                val = t * prev[i] + (1.0 - t) * prev[i + 1]
                cur.append(np.where(den > 0, val, prev[i]))
            prev = cur
    F = np.clip(prev[0], 0.0, 1.0)
    F = np.where(x <= V[:, 0], np.where(V[:, k] == V[:, 0], (x >= V[:, 0]).astype(float), 0.0), F)
    return np.where(x >= V[:, k], 1.0, F)


class SimplexValues:
    """A collection of simplices carrying affine (or constant) values.

    Parameters
    ----------
    values : (m, k+1) vertex values (P1) or (m,) cell values (P0)
    weights : (m,) simplex measures (optionally pre-multiplied by a density)
    """

    def __init__(self, values, weights):
        v = np.asarray(values, dtype=float)
        if v.ndim == 1:
            v = v[:, None]
        self.V = np.sort(v, axis=1)
        self.W = np.asarray(weights, dtype=float)
        self.k = self.V.shape[1] - 1
        self.vmin = self.V[:, 0]
        self.vmax = self.V[:, -1]
        self.const = self.vmax == self.vmin
        nc = ~self.const
        self._nc_idx = np.nonzero(nc)[0]
        order = np.argsort(self.vmin[nc], kind="stable")
        self._nc_sorted_min = self.vmin[nc][order]
        self._nc_suffix = np.concatenate([np.cumsum(self.W[nc][order][::-1])[::-1], [0.0]])
        corder = np.argsort(self.vmin[self.const], kind="stable")
        self._c_sorted = self.vmin[self.const][corder]
        self._c_suffix = np.concatenate([np.cumsum(self.W[self.const][corder][::-1])[::-1], [0.0]])

    @property
    def total(self) -> float:
        return float(self.W.sum())

    def negated(self) -> "SimplexValues":
        return SimplexValues(-self.V[:, ::-1], self.W)

    def knots(self) -> np.ndarray:
        return np.unique(self.V)

    # -- exact measure of {u > x}, {u >= x} -----------------------------
    def tail(self, x, strict: bool = True) -> np.ndarray:
        """``sum_c W_c P_c(u > x)`` (or ``>=`` when ``strict`` is False)."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        order = np.argsort(x, kind="stable")
        xs = x[order]
        # full nonconstant cells: vmin >= x
        pos = np.searchsorted(self._nc_sorted_min, xs, side="left")
        out = self._nc_suffix[pos].copy()
        # constant cells
        side = "right" if strict else "left"
        out += self._c_suffix[np.searchsorted(self._c_sorted, xs, side=side)]
        # partial nonconstant cells: vmin < x < vmax
        idx = self._nc_idx
        lo = np.searchsorted(xs, self.vmin[idx], side="right")
        hi = np.searchsorted(xs, self.vmax[idx], side="left")
        cnt = np.maximum(hi - lo, 0)
        if cnt.sum():
            acc = np.zeros(len(xs))
            starts = np.concatenate([[0], np.cumsum(cnt)])
            cell_chunks = np.searchsorted(starts, np.arange(0, starts[-1], _CHUNK), side="right") - 1
            bounds = list(cell_chunks) + [len(idx)]
            for a, b in zip(bounds[:-1], bounds[1:]):
                if b <= a:
                    continue
                c = cnt[a:b]
                cells = np.repeat(idx[a:b], c)
                offs = np.arange(c.sum()) - np.repeat(starts[a:b] - starts[a], c)
                xi = np.repeat(lo[a:b], c) + offs
                F = cell_cdf(self.V[cells], xs[xi])
                acc += np.bincount(xi, weights=self.W[cells] * (1.0 - F), minlength=len(xs))
            out += acc
        res = np.empty_like(out)
        res[order] = out
        return res

    def cdf_all(self, x: float) -> np.ndarray:
        """Per-simplex ``P(u <= x)``."""
        return cell_cdf(self.V, np.full(len(self.V), float(x)))

    # -- partial moments -------------------------------------------------
    def lower_moment(self, x: float) -> np.ndarray:
        """Per-simplex ``E[(x - u)_+] = int_{-inf}^x F``."""
        x = float(x)
        V = self.V
        m = max(2, (self.k + 2) // 2)
        t, w = gauss_legendre01(m)
        out = np.maximum(x - V[:, -1], 0.0)
        for i in range(self.k):
            a = V[:, i]
            b = np.minimum(V[:, i + 1], x)
            width = b - a
            live = width > 0
            if not np.any(live):
                continue
            rows = np.nonzero(live)[0]
            pts = a[rows, None] + width[rows, None] * t[None, :]
            Vr = np.repeat(V[rows], m, axis=0)
            F = cell_cdf(Vr, pts.ravel()).reshape(len(rows), m)
            out[rows] += width[rows] * (F @ w)
        return out

    def mean_values(self) -> np.ndarray:
        return self.V.mean(axis=1)

    def integral_below(self, x: float, mask=None) -> float:
        """``int_{u < x} (x - u)`` with weights ``W``."""
        w = self.W if mask is None else self.W * mask
        return float(w @ self.lower_moment(x))

    def integral_above(self, x: float, mask=None) -> float:
        """``int_{u > x} (u - x)`` with weights ``W``."""
        w = self.W if mask is None else self.W * mask
        return float(w @ (self.mean_values() - x + self.lower_moment(x)))


def sublevel_volume(volume: float, values, a: float, b: float) -> float:
    """Volume of ``{a < u <= b}`` within one simplex of the given volume."""
    if not a < b:
        raise ValueError(f"empty interval ({a}, {b}]")
    V = np.sort(np.asarray(values, dtype=float))[None, :]
    Fb = cell_cdf(V, np.array([b]))[0]
    Fa = cell_cdf(V, np.array([a]))[0]
    return float(volume * (Fb - Fa))
