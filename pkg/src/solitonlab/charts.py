"""Conformal normal forms of warped metrics.

Three charts, by the number of ends where the warp closes:

* Product (no closing end):   g = u(t)^2 (dt^2 + g_fiber),           dt = dr / w
* Punctured (closes at r_min): g = v(t)^2 (dt^2 + t^2 g_S),            dt / t = ds / (c w)
* TwoPoint (closes at both):  g = w_f(t)^2 (dt^2 + sin^2 t g_S),      dt / sin t = ds / (c w)

with ``c^2 = (n-1)(n-2) / R_sigma`` and ``g_fiber = c^2 g_S``.  Near a closing
end ``1/w`` behaves like ``c/s``; that part is integrated in closed form and
only the smooth remainder goes through quadrature.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable

import numpy as np
from scipy.optimize import brentq

from . import geometry as geo
from .errors import (InconsistentClosingError, NonSmoothClosingError, WrongCaseError)
from .profile import grid_derivative, zeros_of

SMOOTH_CLOSING_TOL = 1e-6
QUAD_TOL = 1e-13
OVERFLOW_LOG = math.log(1e300)
BOUNDED_POWER = 1.05

_GL15 = np.polynomial.legendre.leggauss(15)
_GL7 = np.polynomial.legendre.leggauss(7)


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def _gauss(g, a, b, rule):
    x, wts = rule
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    vals = np.asarray(g(pts.ravel()), dtype=float).reshape(pts.shape)
    return half * (vals @ wts)


def cell_integrals(g: Callable, a, b, tol: float = QUAD_TOL, depth: int = 40) -> np.ndarray:
    """Integrals of ``g`` over the cells ``[a_i, b_i]``, adaptively bisected.

    Each cell is accepted when the 15- and 7-point Gauss rules agree to
    ``tol`` (relative to the larger of 1 and the cell value); otherwise it is
    split in two.  ``g`` must be vectorized.
    """
    a = np.atleast_1d(np.asarray(a, dtype=float))
    b = np.atleast_1d(np.asarray(b, dtype=float))
    out = np.zeros(len(a))
    if len(a) == 0:
        return out
    hi = _gauss(g, a, b, _GL15)
    lo = _gauss(g, a, b, _GL7)
    bad = np.abs(hi - lo) > tol * np.maximum(1.0, np.abs(hi))
    out[~bad] = hi[~bad]
    if bad.any():
        if depth == 0:
            out[bad] = hi[bad]
        else:
            ab, bb = a[bad], b[bad]
            mid = 0.5 * (ab + bb)
            out[bad] = (cell_integrals(g, ab, mid, tol, depth - 1)
                        + cell_integrals(g, mid, bb, tol, depth - 1))
    return out


class _Primitive:
    """x -> integral of g from ``base`` to ``x``, anchored on grid nodes."""

    def __init__(self, g: Callable, nodes: np.ndarray, base: float):
        self.g = g
        self.nodes = nodes
        cells = cell_integrals(g, nodes[:-1], nodes[1:])
        self.cum = np.concatenate([[0.0], np.cumsum(cells)])
        self.offset = 0.0
        self.offset = float(self(np.array([base]))[0])

    def __call__(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        j = np.clip(np.searchsorted(self.nodes, x) - 1, 0, len(self.nodes) - 1)
        return self.cum[j] + cell_integrals(self.g, self.nodes[j], x) - self.offset

    def at_nodes(self) -> np.ndarray:
        return self.cum - self.offset


def _tail(z: np.ndarray, gz: np.ndarray):
    """Boundedness and tail estimate of the integral of a positive ``g`` beyond ``z[-1]``.

    ``z`` increases away from the base point.  Bounded when ``g`` decays
    faster than ``z^-1.05``; the tail is then estimated from an exponential
    or power-law fit, whichever is more consistent over the last two windows.
    """
    n = len(z)
    ia, ib, ic = n - 1, n - 1 - max(1, n // 10), n - 1 - 2 * max(1, n // 10)
    if ic < 0 or np.any(z[[ia, ib, ic]] <= 0.0) or np.any(gz[[ia, ib, ic]] <= 0.0):
        return False, math.inf
    lg = np.log(gz[[ia, ib, ic]])
    lz = np.log(z[[ia, ib, ic]])
    a2 = (lg[1] - lg[0]) / (z[ia] - z[ib])
    a1 = (lg[2] - lg[1]) / (z[ib] - z[ic])
    p2 = (lg[1] - lg[0]) / (lz[0] - lz[1])
    p1 = (lg[2] - lg[1]) / (lz[1] - lz[2])
    if not p2 > BOUNDED_POWER:
        return False, math.inf
    rel_a = abs(a1 - a2) / abs(a2)
    rel_p = abs(p1 - p2) / abs(p2)
    if rel_a < rel_p:
        return True, float(gz[ia] / a2)
    return True, float(gz[ia] * z[ia] / (p2 - 1.0))


# ---------------------------------------------------------------------------
# closing constant
# ---------------------------------------------------------------------------

def _neville_at_zero(h, q):
    p = np.array(q, dtype=float)
    h = np.asarray(h, dtype=float)
    n = len(p)
    for k in range(1, n):
        p[: n - k] = (h[: n - k] * p[1: n - k + 1] - h[k:] * p[: n - k]) / (h[: n - k] - h[k:])
    return float(p[0])


def closing_limit(m: geo.WarpedMetric, endpoint: str = "lower", levels: int = 6) -> float:
    """Richardson estimate of lim |w(r)| / |r - r_end| at a closing end."""
    r0, r1 = m.grid.r_min, m.grid.r_max
    span = r1 - r0
    h0 = 0.05 * span
    if not m.warp.is_analytic:
        h0 = max(h0, 8 * m.grid.h)
        levels = max(2, min(levels, int(math.log2(h0 / m.grid.h)) + 1))
    h = h0 / 2.0 ** np.arange(levels)
    x = r0 + h if endpoint == "lower" else r1 - h
    q = np.abs(m.warp(x)) / h
    return _neville_at_zero(h, q)


def closing_constant(m: geo.WarpedMetric, endpoint: str = "lower", tol: float = SMOOTH_CLOSING_TOL) -> float:
    """c = ((n-1)(n-2)/R_sigma)^(1/2), after checking the closing is smooth.

    Smoothness means lim w / (r - r_end) = 1/c, which is what keeps the
    metric free of a conical point at the end.
    """
    if endpoint not in ("lower", "upper"):
        raise ValueError(f"endpoint must be 'lower' or 'upper', got {endpoint!r}")
    rep = zeros_of(m.warp, 0)
    if not (rep.closes_lower if endpoint == "lower" else rep.closes_upper):
        raise WrongCaseError(f"warp does not close at the {endpoint} end")
    Rs = m.fiber.R_sigma
    if Rs <= 0.0:
        raise InconsistentClosingError(f"closing end needs positive fiber curvature, got R_sigma={Rs}")
    c = math.sqrt((m.n - 1) * (m.n - 2) / Rs)
    limit = closing_limit(m, endpoint)
    if abs(limit - 1.0 / c) > tol * max(1.0, 1.0 / c):
        raise NonSmoothClosingError(
            f"{endpoint} end: lim w/s = {limit:.10g} but smooth closing needs 1/c = {1.0 / c:.10g}")
    return c


# ---------------------------------------------------------------------------
# charts
# ---------------------------------------------------------------------------

class ChartCase(str, Enum):
    PRODUCT = "Product"
    PUNCTURED = "Punctured"
    TWO_POINT = "TwoPoint"


@dataclass
class ConformalChart:
    case: ChartCase
    t: np.ndarray
    r: np.ndarray
    factor: np.ndarray
    t_lower: float
    t_upper: float
    lower_bounded: bool
    upper_bounded: bool
    c: float | None
    base: float
    prime: bool = False
    _t_of_r: Callable = field(repr=False, default=None)
    _dt_dr: Callable = field(repr=False, default=None)
    _domain: tuple = field(repr=False, default=None)

    def t_of_r(self, r) -> np.ndarray:
        return self._t_of_r(np.atleast_1d(np.asarray(r, dtype=float)))

    def r_of_t(self, t, tol: float = 1e-12, maxiter: int = 200) -> np.ndarray:
        """Invert t(r) by Newton steps safeguarded with bisection."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lo_t = self.t[0] if self.case is ChartCase.PRODUCT else 0.0
        hi_t = math.pi if self.case is ChartCase.TWO_POINT else self.t[-1]
        if np.any((t < lo_t) | (t > hi_t)):
            raise ValueError(f"t outside the charted range [{lo_t:g}, {hi_t:g}]")
        lo_dom, hi_dom = self._domain
        j = np.searchsorted(self.t, t)
        r_ext = np.concatenate([[lo_dom], self.r, [hi_dom]])
        lo = r_ext[j].copy()
        hi = r_ext[j + 1].copy()
        x = np.interp(t, self.t, self.r)
        x = np.clip(x, lo, hi)
        inner = (x <= lo) | (x >= hi)
        x[inner] = 0.5 * (lo[inner] + hi[inner])
        done = np.zeros(len(t), dtype=bool)
        for _ in range(maxiter):
            F = self.t_of_r(x) - t
            done = (np.abs(F) <= tol) | (hi - lo <= 4 * np.finfo(float).eps * np.maximum(1.0, np.abs(x)))
            if done.all():
                break
            above = F > 0
            hi = np.where(above, x, hi)
            lo = np.where(above, lo, x)
            step = x - F / self._dt_dr(x)
            bisect = ~((step > lo) & (step < hi))
            x = np.where(done, x, np.where(bisect, 0.5 * (lo + hi), step))
        return x

    def summary(self) -> dict:
        return {
            "case": self.case.value,
            "c": self.c,
            "base": self.base,
            "t_star": self.t_lower if self.lower_bounded else None,
            "t_star_upper": self.t_upper if self.upper_bounded else None,
            "lower_bounded": self.lower_bounded,
            "upper_bounded": self.upper_bounded,
            "prime": self.prime,
        }

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["t", "r", "factor"])
            for row in zip(self.t, self.r, self.factor):
                out.writerow([f"{x:.17g}" for x in row])

    def write_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh, indent=2, sort_keys=True)
            fh.write("\n")


def _closing_pattern(m: geo.WarpedMetric):
    rep = zeros_of(m.warp, 0)
    if rep.roots:
        raise WrongCaseError(f"warp vanishes inside the grid at r = {rep.roots}")
    return rep.closes_lower, rep.closes_upper


def _case1_base(m):
    r = m.grid.r
    if r[0] <= 0.0 <= r[-1]:
        return 0.0
    return 0.5 * (r[0] + r[-1])


def _closing_base(m, s_nodes, w_nodes, r_star):
    """Lower limit for the log-integral: the level where w = 1, else 10% into the grid."""
    above = np.flatnonzero((w_nodes[:-1] - 1.0) * (w_nodes[1:] - 1.0) <= 0.0)
    if len(above):
        i = int(above[0])
        if w_nodes[i] == 1.0:
            return float(s_nodes[i])
        return float(brentq(lambda s: m.warp(s + r_star) - 1.0, s_nodes[i], s_nodes[i + 1], xtol=1e-15))
    # w may touch 1 at an extremum without crossing (round sphere equator)
    i = int(np.argmin(np.abs(w_nodes - 1.0)))
    if 0 < i < len(s_nodes) - 1:
        dw = lambda s: m.warp(s + r_star, 1)
        a, b = s_nodes[i - 1], s_nodes[i + 1]
        if dw(a) * dw(b) < 0.0:
            ext = float(brentq(dw, a, b, xtol=1e-15))
            if abs(m.warp(ext + r_star) - 1.0) < 1e-12:
                return ext
    span = s_nodes[-1]
    return float(s_nodes[np.searchsorted(s_nodes, 0.1 * span)])


def chart_case1(m: geo.WarpedMetric, base: float | None = None) -> ConformalChart:
    """g = u(t)^2 (dt^2 + g_fiber) with t(r) = integral of 1/w from the base level."""
    lo_close, hi_close = _closing_pattern(m)
    if lo_close or hi_close:
        raise WrongCaseError("warp closes at an end: not a product chart")
    r = m.grid.r
    base = _case1_base(m) if base is None else float(base)
    inv = lambda x: 1.0 / m.warp(x)
    prim = _Primitive(inv, r, base)
    t = prim.at_nodes()
    w = m.warp.values
    up_b, up_tail = _tail(r[r > base] - base, 1.0 / w[r > base]) if np.any(r > base) else (False, math.inf)
    down = r < base
    lo_b, lo_tail = _tail((base - r[down])[::-1], (1.0 / w[down])[::-1]) if np.any(down) else (False, math.inf)
    t_upper = t[-1] + up_tail if up_b else math.inf
    t_lower = t[0] - lo_tail if lo_b else -math.inf
    curv = geo.curvature_sweep(m)
    return ConformalChart(ChartCase.PRODUCT, t, r.copy(), w.copy(), t_lower, t_upper, lo_b, up_b,
                          None, base, prime=curv.min_ricci >= -1e-8,
                          _t_of_r=prim, _dt_dr=inv, _domain=(r[0], r[-1]))


def _smooth_closings(m, lower, upper):
    c = None
    if lower:
        c = closing_constant(m, "lower")
    if upper:
        c = closing_constant(m, "upper")
    return c


def chart_case2(m: geo.WarpedMetric, base: float | None = None) -> ConformalChart:
    """g = v(t)^2 (dt^2 + t^2 g_S), t(s) = exp((1/c) * integral of ds / w)."""
    lo_close, hi_close = _closing_pattern(m)
    if not lo_close or hi_close:
        raise WrongCaseError("punctured chart needs the warp to close at r_min only")
    c = _smooth_closings(m, True, False)
    r_star = m.grid.r_min
    r = m.grid.r[1:]
    s = r - r_star
    w = m.warp.values[1:]
    s0 = _closing_base(m, s, w, r_star) if base is None else float(base)
    smooth = lambda z: 1.0 / m.warp(z + r_star) - c / z
    prim = _Primitive(smooth, s, s0)

    def log_t(x_s):
        return prim(x_s) / c + np.log(x_s / s0)

    lt = prim.at_nodes() / c + np.log(s / s0)
    bounded, tail = _tail(s, 1.0 / w)
    if lt[-1] > OVERFLOW_LOG:
        bounded = False
    t_upper = math.exp(lt[-1] + tail / c) if bounded else math.inf
    t = np.exp(lt)
    curv = geo.curvature_sweep(m)
    prime = (not bounded) and curv.min_ricci >= -1e-8
    return ConformalChart(
        ChartCase.PUNCTURED, t, r.copy(), c * w / t, 0.0, t_upper, True, bounded, c, s0 + r_star,
        prime=prime,
        _t_of_r=lambda x: np.exp(log_t(x - r_star)),
        _dt_dr=lambda x: np.exp(log_t(x - r_star)) / (c * m.warp(x)),
        _domain=(r_star, m.grid.r_max),
    )


def chart_case3(m: geo.WarpedMetric, base: float | None = None) -> ConformalChart:
    """g = w_f(t)^2 (dt^2 + sin^2 t g_S), t(s) = 2 arctan exp((1/c) * integral of ds / w)."""
    lo_close, hi_close = _closing_pattern(m)
    if not (lo_close and hi_close):
        raise WrongCaseError("two-point chart needs the warp to close at both ends")
    c = _smooth_closings(m, True, True)
    r_star = m.grid.r_min
    L = m.grid.r_max - r_star
    r = m.grid.r[1:-1]
    s = r - r_star
    w = m.warp.values[1:-1]
    s0 = _closing_base(m, s, w, r_star) if base is None else float(base)
    smooth = lambda z: 1.0 / m.warp(z + r_star) - c / z - c / (L - z)
    prim = _Primitive(smooth, s, s0)

    def expo(x_s):
        return prim(x_s) / c + np.log(x_s / s0) - np.log((L - x_s) / (L - s0))

    def t_of(x_s):
        # 2 arctan(e^J) written without overflow
        return 0.5 * np.pi + 2.0 * np.arctan(np.tanh(0.5 * expo(x_s)))

    J = prim.at_nodes() / c + np.log(s / s0) - np.log((L - s) / (L - s0))
    t = 0.5 * np.pi + 2.0 * np.arctan(np.tanh(0.5 * J))
    return ConformalChart(
        ChartCase.TWO_POINT, t, r.copy(), c * w / np.sin(t), 0.0, math.pi, True, True, c, s0 + r_star,
        _t_of_r=lambda x: t_of(x - r_star),
        _dt_dr=lambda x: np.sin(t_of(x - r_star)) / (c * m.warp(x)),
        _domain=(r_star, m.grid.r_max),
    )


def chart_for(m: geo.WarpedMetric, base: float | None = None) -> ConformalChart:
    """Pick the chart matching the closing pattern of the warp."""
    lo, hi = _closing_pattern(m)
    if lo and hi:
        return chart_case3(m, base)
    if lo:
        return chart_case2(m, base)
    if hi:
        raise WrongCaseError("warp closes at r_max only; reverse the radial coordinate")
    return chart_case1(m, base)


def pullback_verify(m: geo.WarpedMetric, chart: ConformalChart, order: int = 6) -> float:
    """Largest relative mismatch between ``m`` and the metric rebuilt from ``chart``.

    dt/dr is taken by finite differences of the chart samples, so the check
    does not reuse the formula the chart was built from.
    """
    r, t, factor = chart.r, chart.t, chart.factor
    dtdr = grid_derivative(r, t, 1, order)
    w = m.warp(r)
    radial = factor**2 * dtdr**2
    if chart.case is ChartCase.PRODUCT:
        tangential, target = factor**2, w**2
    else:
        if m.fiber.R_sigma <= 0.0:
            raise InconsistentClosingError("sphere chart needs positive fiber curvature")
        c = math.sqrt((m.n - 1) * (m.n - 2) / m.fiber.R_sigma)
        model = t if chart.case is ChartCase.PUNCTURED else np.sin(t)
        tangential, target = (factor * model) ** 2, (c * w) ** 2
    rel = np.maximum(np.abs(radial - 1.0), np.abs(tangential - target) / np.abs(target))
    return float(np.max(rel))
