"""Integral identities on compact rotationally symmetric metrics.

The metric is ``ds^2 + b(s)^2 g_{S^{n-1}}`` on ``[0, L]`` with ``b`` closing
smoothly at both ends, so ``dV = b^{n-1} omega_{n-1} ds`` with
``omega_{n-1}`` the area of the unit ``(n-1)``-sphere.  Curvature is 0/0 at
the closings, but every integrand carries ``b^{n-1}``; the endpoint terms are
set to zero instead of evaluated.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from . import geometry as geo
from . import verify
from .errors import InputError
from .profile import RadialProfile, grid_derivative, stencil_sizes

ANALYTIC_TOL = 1e-8
FD_TOL = 1e-6
CLOSING_VALUE_TOL = 1e-8
CLOSING_SLOPE_TOL = 1e-6


def gamma_half(x: float) -> float:
    """Gamma at a positive integer or half-integer, by recurrence."""
    twice = 2.0 * x
    if twice != round(twice) or x <= 0:
        raise InputError(f"gamma_half needs a positive multiple of 1/2, got {x}")
    g, y = (1.0, 1.0) if round(twice) % 2 == 0 else (math.sqrt(math.pi), 0.5)
    while y < x:
        g *= y
        y += 1.0
    return g


def sphere_area(dim: int) -> float:
    """Area of the unit ``dim``-sphere in R^{dim+1}."""
    return 2.0 * math.pi ** ((dim + 1) / 2) / gamma_half((dim + 1) / 2)


@dataclass(frozen=True)
class CompactRotMetric:
    n: int
    warp: RadialProfile

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InputError(f"dimension must be an integer >= 3, got {self.n}")
        b = self.warp.values
        scale = float(np.max(np.abs(b)))
        if abs(b[0]) > CLOSING_VALUE_TOL * scale or abs(b[-1]) > CLOSING_VALUE_TOL * scale:
            raise InputError("warp must vanish at both ends of a compact rotationally symmetric metric")
        if abs(self.warp.d1[0] - 1.0) > CLOSING_SLOPE_TOL or abs(self.warp.d1[-1] + 1.0) > CLOSING_SLOPE_TOL:
            raise InputError(f"warp must close smoothly: b'(0) = {self.warp.d1[0]:.6g}, "
                             f"b'(L) = {self.warp.d1[-1]:.6g}; need 1 and -1")
        if np.any(b[1:-1] <= 0.0):
            raise InputError("warp must be positive on the open interval")

    @property
    def s(self) -> np.ndarray:
        return self.warp.grid.r

    @property
    def metric(self) -> geo.WarpedMetric:
        return geo.WarpedMetric(self.n, self.warp, geo.FiberDescriptor.round_sphere(self.n - 1))

    @property
    def omega(self) -> float:
        return sphere_area(self.n - 1)

    @property
    def weight(self) -> np.ndarray:
        return self.warp.values ** (self.n - 1) * self.omega

    @property
    def tolerance(self) -> float:
        return ANALYTIC_TOL if self.warp.is_analytic else FD_TOL

    def interior(self, fn) -> np.ndarray:
        """Samples of ``fn(r)`` at interior nodes, zero at the two closings."""
        out = np.zeros(self.warp.grid.nodes)
        out[1:-1] = fn(self.s[1:-1])
        return out


@dataclass
class IdentityReport:
    name: str
    lhs: float
    rhs: float
    defect: float
    estimate: float
    tol: float
    details: dict = field(default_factory=dict)
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return bool(self.defect < max(self.tol, 10.0 * self.estimate)) and not self.failures


def _cubic_tail(x, y) -> float:
    """Integral over [x0, x3] of the cubic through four points (3/8 rule when uniform)."""
    a, b = x[0], x[3]
    t = x - a
    moments = [(b - a) ** (j + 1) / (j + 1) for j in range(4)]
    weights = np.linalg.solve(np.vander(t, 4, increasing=True).T, moments)
    return float(weights @ y)


def _simpson(x, y) -> float:
    # an odd number of intervals ends with a cubic panel so cubics stay exact
    if len(x) % 2 == 0 and len(x) >= 4:
        head = float(simpson(y[:-3], x=x[:-3])) if len(x) > 4 else 0.0
        return head + _cubic_tail(x[-4:], y[-4:])
    return float(simpson(y, x=x))


def composite_simpson(x, y, full_output: bool = False):
    """Simpson's rule with a Richardson error estimate from the every-other-node rule."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    fine = _simpson(x, y)
    if not full_output:
        return fine
    idx = np.arange(0, len(x), 2)
    if idx[-1] != len(x) - 1:
        idx = np.append(idx, len(x) - 1)
    coarse = _simpson(x[idx], y[idx])
    return fine, abs(fine - coarse) / 15.0


def volume_integral(m: CompactRotMetric, integrand, full_output: bool = False):
    """Integral of ``integrand`` (samples on the grid) against dV."""
    integrand = np.asarray(integrand, dtype=float)
    if integrand.shape != m.s.shape:
        raise InputError(f"integrand has {integrand.size} samples, grid has {m.s.size}")
    y = np.zeros_like(integrand)
    y[1:-1] = integrand[1:-1] * m.weight[1:-1]
    return composite_simpson(m.s, y, full_output)


def _chain_estimate(*ests) -> float:
    return float(sum(abs(e) for e in ests))


def check_divergence(m: CompactRotMetric, f: RadialProfile, tol: float | None = None) -> IdentityReport:
    """Integral of the Laplacian of ``f`` over the closed manifold is zero."""
    lap = m.interior(lambda r: geo.laplacian(m.metric, f, r))
    val, est = volume_integral(m, lap, True)
    return IdentityReport("divergence", val, 0.0, abs(val), est, m.tolerance if tol is None else tol)


def check_lambda_mean(m: CompactRotMetric, f: RadialProfile, lam: float, tol: float | None = None) -> IdentityReport:
    """lambda against the volume average of R."""
    g = m.metric
    R = m.interior(lambda r: geo.scalar(g, r))
    vol, e_vol = volume_integral(m, np.ones_like(R), True)
    tot, e_tot = volume_integral(m, R, True)
    mean = tot / vol
    est = (e_tot + abs(mean) * e_vol) / vol
    lap_int, _ = volume_integral(m, m.interior(lambda r: geo.laplacian(g, f, r)), True)
    return IdentityReport("lambda_mean", float(lam), mean, abs(lam - mean), est,
                          m.tolerance if tol is None else tol,
                          {"volume": vol, "mean_R": mean, "laplacian_integral": lap_int})


def check_bochner_chain(m: CompactRotMetric, f: RadialProfile, lam: float | None = None,
                        R=None, tol: float | None = None) -> IdentityReport:
    """Integral chain for a compact Yamabe soliton.

    With Hess f = (R - lambda) g:

        A  = int (R - lambda) R dV
        A' = int <Ric, Hess f> dV             (equals A for a soliton)
        B  = -1/2 int R' f' dV                (equals A' for every f, by Schur)
        C  = n/2 int (R - lambda)^2 dV        (equals B when Lap f = n (R - lambda))

    ``A = C`` then forces the rigidity gap ``int (R-lambda)^2 - C`` to vanish.
    The trace defect ``||Lap f - n (R - lambda)||`` catches pairs for which
    every term vanishes trivially.  ``R`` may be given as samples to study
    synthetic perturbations; ``R'`` then comes from finite differences.
    """
    g = m.metric
    n = m.n
    if R is None:
        R = m.interior(lambda r: geo.scalar(g, r))
        dR = m.interior(lambda r: geo.scalar_gradient(g, r))
    else:
        R = np.asarray(R, dtype=float)
        if R.shape != m.s.shape:
            raise InputError("R samples do not match the grid")
        dR = np.zeros_like(R)
        dR[1:-1] = grid_derivative(m.s[1:-1], R[1:-1], 1, 6)
    vol = volume_integral(m, np.ones_like(R))
    if lam is None:
        lam = volume_integral(m, R) / vol
    dev = R - lam
    fp = m.interior(lambda r: f(r, 1))

    def ric_hess(r):
        ric_rr, ric_tan = geo.ricci(g, r)
        rad, tan = geo.hessian_eigenvalues(g, f, r)
        return ric_rr * rad + (n - 1) * ric_tan * tan

    A, eA = volume_integral(m, dev * R, True)
    A1 = volume_integral(m, m.interior(ric_hess))
    B, eB = volume_integral(m, -0.5 * dR * fp, True)
    sq, esq = volume_integral(m, dev**2, True)
    C = 0.5 * n * sq
    lap = m.interior(lambda r: geo.laplacian(g, f, r))
    trace_sq, etr = volume_integral(m, (lap - n * dev) ** 2, True)
    trace = math.sqrt(max(trace_sq, 0.0))
    gap = sq - C
    tol = m.tolerance if tol is None else tol
    defect = max(abs(A - B), trace)
    rep = IdentityReport("bochner_chain", A, B, defect, _chain_estimate(eA, eB),
                         tol, {"lambda": float(lam), "A": A, "A_prime": A1, "B": B, "C": C,
                               "int_dev_sq": sq, "trace_defect": trace, "rigidity_gap": gap})
    if trace >= max(tol, 10.0 * etr):
        rep.failures.append("Lap f != n (R - lambda): not a Yamabe soliton potential")
    if gap < -max(tol, 10.0 * esq * n):
        rep.failures.append("rigidity gap negative: scalar curvature is not constant")
    return rep


def check_schur(m, tol: float | None = None) -> IdentityReport:
    """sup |2 div(Ric)_r - R'| over interior nodes; holds for every metric.

    With analytic derivatives both sides come from the warp jets and each
    node's defect is divided by max(1, magnitude of the terms of R'), so nodes
    next to a closing, where those terms are O(1/w^3) and cancel, are judged
    relative to the rounding they carry.

    For sampled warps the jets satisfy the identity algebraically, so R' and
    Ric_rr' are instead taken by finite differences of the curvature samples
    and the defect measures FD error.  Nodes within two stencil widths of the
    grid ends are skipped (nested one-sided stencils lose an order there) and
    the default tolerance is 10 h^order times the largest term magnitude.
    """
    g = m.metric if isinstance(m, CompactRotMetric) else m
    r = g.grid.r[geo.interior_mask(g)]
    if g.warp.is_analytic:
        lhs = 2.0 * geo.ricci_divergence_radial(g, r)
        rhs = geo.scalar_gradient(g, r)
        diff = np.abs(lhs - rhs)
        rel = diff / np.maximum(1.0, geo.scalar_gradient_magnitude(g, r))
        default_tol = ANALYTIC_TOL
    else:
        n, order = g.n, g.warp.order
        ric_rr, ric_tan = geo.ricci(g, r)
        w, w1 = g.warp(r), g.warp(r, 1)
        d_ric_rr = grid_derivative(r, ric_rr, 1, order)
        lhs = 2.0 * (d_ric_rr + (n - 1) * (w1 / w) * (ric_rr - ric_tan))
        rhs = grid_derivative(r, geo.scalar(g, r), 1, order)
        margin = 2 * stencil_sizes(3, order, g.grid.uniform)[1]
        if len(r) <= 2 * margin + 1:
            raise InputError("grid too coarse for the finite-difference Schur check")
        keep = slice(margin, len(r) - margin)
        r, lhs, rhs = r[keep], lhs[keep], rhs[keep]
        diff = rel = np.abs(lhs - rhs)
        terms = float(np.max(geo.scalar_gradient_magnitude(g, r)))
        default_tol = 10.0 * g.grid.h**order * max(1.0, terms)
    i = int(np.argmax(rel))
    tol = default_tol if tol is None else tol
    return IdentityReport("schur", float(lhs[i]), float(rhs[i]), float(rel[i]), 0.0, tol,
                          {"r_worst": float(r[i]), "absolute_sup": float(np.max(diff)),
                           "scale": float(np.max(np.abs(rhs)))})


def check_kazdan_warner_integral(m: CompactRotMetric, f: RadialProfile, k: int,
                                 tol: float | None = None) -> IdentityReport:
    """I1 = int f' (sigma_k)' dV against I2 = -1/(2(n-1)^2) int Ric_rr f'^2 dV.

    I1 vanishes for any conformal gradient field on a compact conformally
    flat manifold (Kazdan-Warner).  I1 = I2 holds pointwise-integrated only
    for k-Yamabe potentials, so a conformal but non-k-Yamabe potential fails
    the second identity while satisfying the first.
    """
    g = m.metric
    n = m.n
    res = verify.conformal_residual(g, f)
    if not res.passed:
        raise InputError(f"potential is not conformal (residual {res.sup:.3e}); Kazdan-Warner does not apply")
    sig = m.interior(lambda r: geo.sigma_k(g, r, k))
    dsig = np.zeros_like(sig)
    dsig[1:-1] = grid_derivative(m.s[1:-1], sig[1:-1], 1, 6)
    fp = m.interior(lambda r: f(r, 1))
    ric_rr = m.interior(lambda r: geo.ricci(g, r)[0])
    I1, e1 = volume_integral(m, fp * dsig, True)
    I2, e2 = volume_integral(m, -ric_rr * fp**2 / (2 * (n - 1) ** 2), True)
    tol = m.tolerance if tol is None else tol
    rep = IdentityReport(f"kazdan_warner_k{k}", I1, I2, abs(I1 - I2), e1 + e2, tol,
                         {"I1": I1, "I2": I2, "kazdan_warner": abs(I1)})
    if abs(I1) >= max(tol, 10.0 * e1):
        rep.failures.append("int <grad f, grad sigma_k> dV does not vanish")
    if abs(I1 - I2) >= max(tol, 10.0 * (e1 + e2)):
        rep.failures.append("I1 != I2: f is not a k-Yamabe potential")
    return rep


def write_identities_csv(reports, path) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["identity", "lhs", "rhs", "defect", "estimate", "pass"])
        for rep in reports:
            out.writerow([rep.name, f"{rep.lhs:.17g}", f"{rep.rhs:.17g}", f"{rep.defect:.17g}",
                          f"{rep.estimate:.17g}", "true" if rep.passed else "false"])
