"""Shooting for rotationally symmetric Yamabe-type solitons.

With the round unit sphere as fiber and the potential normalized so that its
derivative is the warp, ``f' = w``, the soliton equation reduces to a single
second-order ODE for ``w(s)``:

* Yamabe:      w' = R - lambda
* k-Yamabe:    w' = 2(n-1)(sigma_k - lambda)
* generalized: w' = psi(sigma_k)

where ``R`` and ``sigma_k`` depend on ``(w, w', w'')``.  For every k the
Schouten eigenvalue along the fiber does not involve ``w''`` and sigma_k is
affine in ``w''``, so each step solves a linear equation; points where the
``w''`` coefficient vanishes are handled explicitly.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from math import comb
from typing import Callable, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.integrate import DOP853
from scipy.optimize import brentq

from . import geometry as geo
from . import verify
from .errors import BranchError, DegenerateMetricError, InputError, SolverFailure, StiffnessError
from .profile import RadialGrid, RadialProfile, grid_derivative

FAMILIES = ("yamabe", "k_yamabe", "generalized")


@dataclass(frozen=True)
class SmoothOrigin:
    """w(0) = 0, w'(0) = 1: the warp closes smoothly at a single point."""


@dataclass(frozen=True)
class Cylinder:
    """w(0) = w0 > 0, w'(0) = a0."""

    w0: float = 1.0
    a0: float = 0.0

    def __post_init__(self):
        if not self.w0 > 0.0:
            raise InputError("cylinder start needs w0 > 0")


Start = Union[SmoothOrigin, Cylinder]


@dataclass(frozen=True)
class OdeProblem:
    n: int
    family: str = "yamabe"
    lam: float = 0.0
    k: int = 1
    psi: Callable | None = None
    psi_inverse: Callable | None = None
    start: Start = SmoothOrigin()
    span: float = 20.0
    rtol: float = 1e-10
    atol: float = 1e-10
    s0: float = 1e-3
    blowup: float = 1e12
    samples: int = 2001

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InputError(f"dimension must be an integer >= 3, got {self.n}")
        if self.family not in FAMILIES:
            raise InputError(f"unknown family {self.family!r}")
        if not 1 <= self.k <= self.n:
            raise InputError(f"need 1 <= k <= n, got k={self.k}")
        if self.family == "yamabe" and self.k != 1:
            raise InputError("the Yamabe family has k = 1")
        if self.family == "generalized" and self.psi is None:
            raise InputError("generalized family needs psi")
        if not self.span > 0.0 or self.samples < 16:
            raise InputError("need span > 0 and at least 16 output samples")

    @property
    def R_sigma(self) -> float:
        return float((self.n - 1) * (self.n - 2))

    def soliton_spec(self):
        if self.family == "yamabe":
            return verify.Yamabe(self.lam)
        if self.family == "k_yamabe":
            return verify.KYamabe(self.k, self.lam)
        return verify.GeneralizedSigmaK(self.psi, self.k)


# ---------------------------------------------------------------------------
# right-hand sides
# ---------------------------------------------------------------------------

def yamabe_rhs(n, lam, s, w, w1, R_sigma=None):
    """w'' solving w' = R - lambda for the warped metric with fiber curvature R_sigma."""
    if w <= 0.0:
        raise DegenerateMetricError(f"w = {w} <= 0 at s = {s}")
    Rs = (n - 1) * (n - 2) if R_sigma is None else R_sigma
    return w * ((Rs - (n - 1) * (n - 2) * w1**2) / w**2 - lam - w1) / (2 * (n - 1))


def sigma_polynomial(n, k, w, w1, R_sigma=None) -> Polynomial:
    """sigma_k as a polynomial in w''."""
    Rs = (n - 1) * (n - 2) if R_sigma is None else R_sigma
    x = Polynomial([0.0, 1.0])
    return geo.sigma_from_warp(n, Rs, w, w1, x, k) + Polynomial([0.0])


def sigma_coefficients(n, k, w, w1, R_sigma=None):
    """(c0, c1) with sigma_k = c0 + c1 w''.

    The tangential Schouten eigenvalue mu_t = Q / (2(n-2)) does not involve
    w'', and the radial one is -w''/w - mu_t, so sigma_k is affine in w''.
    """
    Rs = (n - 1) * (n - 2) if R_sigma is None else R_sigma
    Q = (Rs / (n - 1) - (n - 2) * w1**2) / w**2
    mu_t = Q / (2 * (n - 2))
    c1 = -comb(n - 1, k - 1) * mu_t ** (k - 1) / w
    c0 = (comb(n - 1, k) - comb(n - 1, k - 1)) * mu_t**k
    return c0, c1


def solve_sigma(n, k, w, w1, target, prev, R_sigma=None) -> float:
    """The w'' with sigma_k = target, continuing from ``prev`` where the equation degenerates.

    Where the w'' coefficient vanishes (mu_t = 0, e.g. on flat data with
    k >= 2) every w'' solves the equation if the constant term matches, and
    the previous value is kept; otherwise there is no solution.
    """
    if w <= 0.0:
        raise DegenerateMetricError(f"w = {w} <= 0")
    c0, c1 = sigma_coefficients(n, k, w, w1, R_sigma)
    c0 -= target
    scale = max(1.0, abs(target))
    if abs(c1) * max(1.0, abs(prev)) <= 1e-14 * scale:
        if abs(c0) <= 1e-12 * scale:
            return prev
        raise StiffnessError(f"sigma_{k} does not depend on w'' here and misses its target by {c0:.3e}")
    return -c0 / c1


def k_yamabe_step(n, k, lam, s, w, w1, prev, R_sigma=None):
    """w'' solving w' = 2(n-1)(sigma_k - lambda), on the branch nearest ``prev``."""
    return solve_sigma(n, k, w, w1, lam + w1 / (2 * (n - 1)), prev, R_sigma)


def _invert_monotone(psi: Callable, y: float) -> float:
    """x with psi(x) = y for strictly monotone psi, by bracket expansion and Brent."""
    def g(x):
        v = psi(x) - y
        return v if np.isfinite(v) else np.nan

    for a, b in ((1e-12, 1.0), (-1.0, 1.0)):
        lo, hi = a, b
        for _ in range(200):
            glo, ghi = g(lo), g(hi)
            if np.isfinite(glo) and np.isfinite(ghi) and glo * ghi <= 0.0:
                return float(brentq(g, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))
            if not np.isfinite(glo):
                lo = 0.5 * (lo + hi) if a > 0 else lo / 2
            width = hi - lo
            if np.isfinite(ghi) and np.isfinite(glo) and abs(ghi) < abs(glo):
                hi += 2 * width
            else:
                lo -= 2 * width if a <= 0 else 0.5 * lo
                hi += width
    raise InputError(f"could not invert psi at {y}")


def _target_sigma(problem: OdeProblem, w1: float) -> float:
    if problem.family == "k_yamabe":
        return problem.lam + w1 / (2 * (problem.n - 1))
    if problem.family == "yamabe":
        return (w1 + problem.lam) / (2 * (problem.n - 1))
    if problem.psi_inverse is not None:
        return float(problem.psi_inverse(w1))
    return _invert_monotone(problem.psi, w1)


def origin_series(problem: OdeProblem):
    """(a3, mu0): w = s + a3 s^3 + O(s^5), mu0 the isotropic Schouten value at the origin.

    At a smooth origin the curvature is isotropic with sectional curvature
    K = -6 a3 and Schouten eigenvalue mu0 = K / 2, so sigma_k(0) = C(n,k) mu0^k.
    The first-order condition w'(0) = 1 then fixes mu0.
    """
    n, k = problem.n, problem.k
    sig0 = _target_sigma(problem, 1.0)
    base = sig0 / comb(n, k)
    if k % 2 == 1:
        mu0 = math.copysign(abs(base) ** (1.0 / k), base)
    elif base < 0.0:
        raise BranchError(f"no real isotropic Schouten value with sigma_{k} = {sig0} at the origin")
    else:
        mu0 = base ** (1.0 / k)
    return -mu0 / 3.0, mu0


class _Rhs:
    """First-order system y = (f, w, w') with branch memory for the sigma_k families."""

    def __init__(self, problem: OdeProblem, seed: float):
        self.p = problem
        self.prev = seed

    def w2(self, s, w, w1):
        p = self.p
        if w <= 0.0:
            raise DegenerateMetricError(f"w = {w} <= 0 at s = {s}")
        if p.family == "yamabe":
            x = yamabe_rhs(p.n, p.lam, s, w, w1)
        elif p.family == "k_yamabe":
            x = k_yamabe_step(p.n, p.k, p.lam, s, w, w1, self.prev)
        else:
            x = solve_sigma(p.n, p.k, w, w1, _target_sigma(p, w1), self.prev)
        if not np.isfinite(x):
            raise StiffnessError(f"non-finite w'' at s = {s}")
        self.prev = x
        return x

    def __call__(self, s, y):
        return np.array([y[1], y[2], self.w2(s, y[1], y[2])])


# ---------------------------------------------------------------------------
# solution curves
# ---------------------------------------------------------------------------

@dataclass
class SolutionCurve:
    problem: OdeProblem
    s: np.ndarray
    w: np.ndarray
    w1: np.ndarray
    w2: np.ndarray
    R: np.ndarray
    sigma: np.ndarray
    f: np.ndarray
    events: list = field(default_factory=list)
    status: str = "span"

    @property
    def k(self) -> int:
        return self.problem.k

    def to_pair(self, order: int = 6):
        """(WarpedMetric, potential) on the output grid.

        Second and third derivatives are re-derived by finite differences of
        the sampled ``w'``, so verifying the pair does not reuse the
        right-hand side that produced it.
        """
        n = self.problem.n
        grid = RadialGrid(float(self.s[0]), float(self.s[-1]), len(self.s))
        w2 = grid_derivative(grid.r, self.w1, 1, order)
        w3 = grid_derivative(grid.r, w2, 1, order)
        warp = RadialProfile(grid, (self.w, self.w1, w2, w3), "tabulated", order)
        pot = RadialProfile(grid, (self.f, self.w, self.w1, w2), "tabulated", order)
        fiber = geo.FiberDescriptor.round_sphere(n - 1)
        return geo.WarpedMetric(n, warp, fiber), pot

    def identity_residual(self) -> np.ndarray:
        """|w' - phi(sigma)| along the curve with the solver's own w''."""
        p = self.problem
        if p.family == "yamabe":
            phi = self.R - p.lam
        elif p.family == "k_yamabe":
            phi = 2 * (p.n - 1) * (self.sigma - p.lam)
        else:
            phi = np.asarray(p.psi(self.sigma), dtype=float)
        return np.abs(self.w1 - phi)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["s", "w", "w1", "R", "sigma_k", "f"])
            for row in zip(self.s, self.w, self.w1, self.R, self.sigma, self.f):
                out.writerow([f"{x:.17g}" for x in row])
            fh.write(f"# status: {self.status}\n")
            for kind, s, detail in self.events:
                fh.write(f"# event: {kind} s={s:.17g} {detail}\n")

    @classmethod
    def from_samples(cls, problem: OdeProblem, s, w, w1, f=None, order: int = 6) -> "SolutionCurve":
        """Wrap externally produced samples (e.g. a test profile) as a curve."""
        s = np.asarray(s, dtype=float)
        w = np.asarray(w, dtype=float)
        w1 = np.asarray(w1, dtype=float)
        w2 = grid_derivative(s, w1, 1, order)
        if f is None:
            f = np.concatenate([[0.0], np.cumsum(0.5 * (w[1:] + w[:-1]) * np.diff(s))])
        R, sig = _curvatures(problem, s, w, w1, w2)
        events = []
        if abs(w[-1]) < 1e-6 * np.max(np.abs(w)):
            events.append(("closing", float(s[-1]), "w -> 0"))
        return cls(problem, s, w, w1, w2, R, sig, np.asarray(f, dtype=float), events, "injected")


def _curvatures(problem, s, w, w1, w2, origin=None):
    n, k, Rs = problem.n, problem.k, problem.R_sigma
    R = np.full(len(s), np.nan)
    sig = np.full(len(s), np.nan)
    ok = w > 0.0
    R[ok] = geo.scalar_curvature(n, Rs, w[ok], w1[ok], w2[ok])
    sig[ok] = geo.sigma_from_warp(n, Rs, w[ok], w1[ok], w2[ok], k)
    if origin is not None:
        a3, mu0 = origin
        at0 = ~ok & (s == 0.0)
        R[at0] = -6.0 * n * (n - 1) * a3
        sig[at0] = comb(n, k) * mu0**k
    return R, sig


def _event_values(y, blowup):
    return {"closing": y[1], "turning": y[2], "blowup": blowup - max(abs(y[1]), abs(y[2]))}


def shoot(problem: OdeProblem) -> SolutionCurve:
    """Integrate from the start condition until the span ends or an event stops it."""
    p = problem
    origin = None
    if isinstance(p.start, SmoothOrigin):
        a3, mu0 = origin_series(p)
        origin = (a3, mu0)
        s_start = p.s0
        y0 = np.array([0.5 * s_start**2 + 0.25 * a3 * s_start**4,
                       s_start + a3 * s_start**3, 1.0 + 3.0 * a3 * s_start**2])
        seed = 6.0 * a3 * s_start
    else:
        s_start = 0.0
        y0 = np.array([0.0, p.start.w0, p.start.a0])
        seed = yamabe_rhs(p.n, 0.0, 0.0, p.start.w0, p.start.a0)
    rhs = _Rhs(p, seed)
    if p.family != "yamabe" and isinstance(p.start, Cylinder):
        rhs.prev = rhs.w2(s_start, y0[1], y0[2])

    events = []
    status = "span"
    segments = []
    try:
        solver = DOP853(rhs, s_start, y0, p.span, rtol=p.rtol, atol=p.atol)
    except SolverFailure as exc:
        raise InputError(f"start condition rejected: {exc}") from exc
    prev_ev = _event_values(y0, p.blowup)
    s_end = None
    exact_zero = False
    w_max = max(1.0, abs(y0[1]))
    while solver.status == "running":
        try:
            solver.step()
        except SolverFailure as exc:
            events.append((exc.kind, float(solver.t), str(exc)))
            status = exc.kind
            break
        except DegenerateMetricError as exc:
            events.append(("closing", float(solver.t), f"warp left the domain within the next step: {exc}"))
            status = "closed"
            break
        if solver.status == "failed":
            if abs(solver.y[1]) <= 1e-6 * w_max:
                # the step controller gives up as w collapses onto 0
                events.append(("closing", float(solver.t), f"w -> 0 (step underflow at w = {solver.y[1]:.3e})"))
                status = "closed"
            else:
                events.append(("stiff", float(solver.t), "step size underflow"))
                status = "stiff"
            break
        dense = solver.dense_output()
        segments.append(dense)
        ev = _event_values(solver.y, p.blowup)
        stop = None
        for name in ("closing", "turning", "blowup"):
            if prev_ev[name] * ev[name] < 0.0 or (ev[name] == 0.0 and prev_ev[name] != 0.0):
                fn = lambda s, name=name: _event_values(dense(s), p.blowup)[name]
                s_ev = float(brentq(fn, dense.t_old, dense.t, xtol=1e-14))
                detail = {"closing": "w -> 0", "turning": "w' changes sign", "blowup": "guard exceeded"}[name]
                events.append((name, s_ev, detail))
                if name in ("closing", "blowup") and (stop is None or s_ev < stop[1]):
                    stop = (name, s_ev)
        prev_ev = ev
        w_max = max(w_max, abs(solver.y[1]))
        if stop is not None:
            status = "closed" if stop[0] == "closing" else "blowup"
            s_end = stop[1]
            exact_zero = stop[0] == "closing"
            break
    if not segments:
        raise StiffnessError("integration failed on the first step")
    if s_end is None:
        s_end = float(segments[-1].t)

    bounds = np.array([seg.t_old for seg in segments] + [segments[-1].t])

    def evaluate(s):
        j = np.clip(np.searchsorted(bounds, s, side="right") - 1, 0, len(segments) - 1)
        out = np.empty((3, len(s)))
        for idx in np.unique(j):
            sel = j == idx
            out[:, sel] = segments[idx](s[sel])
        return out

    s0_out = 0.0
    s = np.linspace(s0_out, s_end, p.samples)
    Y = np.empty((3, len(s)))
    inside = s >= s_start
    Y[:, inside] = evaluate(s[inside])
    if origin is not None:
        a3 = origin[0]
        ss = s[~inside]
        Y[:, ~inside] = [0.5 * ss**2 + 0.25 * a3 * ss**4, ss + a3 * ss**3, 1.0 + 3.0 * a3 * ss**2]
    f, w, w1 = Y
    if exact_zero:
        w[-1] = 0.0
    w2 = np.full(len(s), np.nan)
    for i in range(len(s)):
        if w[i] > 0.0:
            try:
                w2[i] = rhs.w2(s[i], w[i], w1[i])
            except SolverFailure:
                pass
    if origin is not None:
        w2[~inside] = 6.0 * origin[0] * s[~inside]
    R, sig = _curvatures(p, s, w, w1, w2, origin)
    return SolutionCurve(p, s, w, w1, w2, R, sig, f, events, status)


@dataclass
class ClosingHandoff:
    candidate: str
    classification: verify.ClassificationResult
    residual: verify.ResidualReport
    contradiction: bool
    notes: list = field(default_factory=list)


def closing_detect(curve: SolutionCurve, tol: float = 1e-6) -> ClosingHandoff:
    """Map integration events to a case and hand the pair to the verifier."""
    closed = any(kind == "closing" for kind, _, _ in curve.events)
    m, f = curve.to_pair()
    classification = verify.classify(m, f, tol)
    residual = verify.soliton_residual(m, f, curve.problem.soliton_spec(), tol)
    notes = []
    contradiction = False
    if closed:
        candidate = "Case3"
        notes.append("warp closes again: compact candidate")
        R = curve.R[np.isfinite(curve.R)]
        if residual.passed and np.ptp(R) > 1e3 * tol:
            contradiction = True
            notes.append("compact Yamabe-type soliton with non-constant curvature passed the residual check")
    elif curve.status in ("span", "blowup"):
        candidate = "Case2"
        if curve.status == "blowup":
            notes.append("growth guard reached")
    else:
        candidate = "Invalid"
        notes.append(f"integration stopped: {curve.status}")
    return ClosingHandoff(candidate, classification, residual, contradiction, notes)
