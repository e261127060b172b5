"""Curvature of warped metrics ``g = dr^2 + w(r)^2 g_fiber``.

All tensors of interest (Ricci, Schouten, Hessians of radial functions) are
diagonal with one radial eigenvalue and one (n-1)-fold tangential eigenvalue,
so everything is carried as pairs of scalars.  The fiber is Einstein with
scalar curvature ``R_sigma`` and Ricci eigenvalue ``R_sigma / (n - 1)``.

The module-level formula functions (:func:`ricci_components`,
:func:`scalar_curvature`, ...) are plain arithmetic on ``(w, w', w'')`` and
accept numpy arrays or ``numpy.polynomial.Polynomial`` objects in place of
``w''``; the ODE solver uses the latter to obtain sigma_k as a polynomial in
the unknown second derivative.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from math import comb

import numpy as np

from .errors import DegenerateMetricError, InputError
from .profile import RadialProfile, stencil_sizes, zeros_of

FIBER_KINDS = ("round_sphere", "flat", "constant")


@dataclass(frozen=True)
class FiberDescriptor:
    """Constant-curvature (Einstein) fiber of dimension ``dim``."""

    kind: str
    R_sigma: float
    dim: int

    def __post_init__(self):
        if self.kind not in FIBER_KINDS:
            raise InputError(f"unknown fiber kind {self.kind!r}")
        if self.dim < 2:
            raise InputError("fiber dimension must be at least 2")
        if not np.isfinite(self.R_sigma):
            raise InputError("fiber scalar curvature must be finite")
        if self.kind == "round_sphere" and self.R_sigma != self.dim * (self.dim - 1):
            raise InputError("unit round sphere fiber must have R_sigma = (n-1)(n-2)")
        if self.kind == "flat" and self.R_sigma != 0.0:
            raise InputError("flat fiber must have R_sigma = 0")

    @classmethod
    def round_sphere(cls, dim: int) -> "FiberDescriptor":
        return cls("round_sphere", float(dim * (dim - 1)), dim)

    @classmethod
    def flat(cls, dim: int) -> "FiberDescriptor":
        return cls("flat", 0.0, dim)

    @classmethod
    def constant(cls, R_sigma: float, dim: int) -> "FiberDescriptor":
        return cls("constant", float(R_sigma), dim)

    @property
    def ricci_eigenvalue(self) -> float:
        return self.R_sigma / self.dim


@dataclass(frozen=True)
class WarpedMetric:
    n: int
    warp: RadialProfile
    fiber: FiberDescriptor

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise InputError(f"dimension must be an integer >= 3, got {self.n}")
        if self.fiber.dim != self.n - 1:
            raise InputError(f"fiber dimension {self.fiber.dim} does not match n - 1 = {self.n - 1}")
        if np.any(self.warp.values[1:-1] <= 0.0):
            raise DegenerateMetricError("warp must be strictly positive on the open interior")

    @property
    def grid(self):
        return self.warp.grid


@dataclass(frozen=True)
class ChristoffelTable:
    """Christoffel symbols in adapted coordinates ``(r, theta)``.

    ``ij_r`` is the coefficient ``c`` in ``Gamma^r_ij = c * g^fiber_ij``;
    ``ir_k`` the coefficient in ``Gamma^k_ir = ir_k * delta^k_i``.
    """

    rr_r: float
    rr_k: float
    ir_r: float
    ij_r: object
    ir_k: object


@dataclass
class CurvatureReport:
    r: np.ndarray
    ric_rr: np.ndarray
    ric_tan: np.ndarray
    R: np.ndarray
    mu_r: np.ndarray
    mu_t: np.ndarray
    sigma: dict = field(default_factory=dict)

    @property
    def min_ricci(self) -> float:
        return float(min(np.min(self.ric_rr), np.min(self.ric_tan)))


# ---------------------------------------------------------------------------
# closed-form formulas
# ---------------------------------------------------------------------------

def fiber_term(n, R_sigma, w, w1):
    """(R_sigma/(n-1) - (n-2) w'^2) / w^2, the part of ric_tan free of w''.

    Near a closing this is a cancellation of O(1/w^2) terms; Ricci and R both
    use this one value so that the trace identity holds to rounding.
    """
    return (R_sigma / (n - 1) - (n - 2) * w1**2) / w**2


def ricci_components(n, R_sigma, w, w1, w2):
    """(Ric_rr, tangential eigenvalue of g^{-1} Ric)."""
    ric_rr = -(n - 1) * w2 / w
    ric_tan = fiber_term(n, R_sigma, w, w1) - w2 / w
    return ric_rr, ric_tan


def scalar_curvature(n, R_sigma, w, w1, w2):
    return -2 * (n - 1) * w2 / w + (n - 1) * fiber_term(n, R_sigma, w, w1)


def schouten_eigenvalues(n, ric_rr, ric_tan, R):
    shift = R / (2 * (n - 1))
    return (ric_rr - shift) / (n - 2), (ric_tan - shift) / (n - 2)


def elementary_symmetric(n, k, mu_r, mu_t):
    """sigma_k of the spectrum (mu_r, mu_t, ..., mu_t) with mu_t repeated n-1 times."""
    if not 1 <= k <= n:
        raise InputError(f"sigma_k needs 1 <= k <= n, got k={k}, n={n}")
    return comb(n - 1, k) * mu_t**k + comb(n - 1, k - 1) * mu_r * mu_t**(k - 1)


def sigma_from_warp(n, R_sigma, w, w1, w2, k):
    ric_rr, ric_tan = ricci_components(n, R_sigma, w, w1, w2)
    R = scalar_curvature(n, R_sigma, w, w1, w2)
    mu_r, mu_t = schouten_eigenvalues(n, ric_rr, ric_tan, R)
    return elementary_symmetric(n, k, mu_r, mu_t)


# ---------------------------------------------------------------------------
# metric-level operations
# ---------------------------------------------------------------------------

def _warp_at(m: WarpedMetric, r, upto: int = 2):
    w = m.warp(r, 0)
    if np.any(np.asarray(w) <= 0.0):
        raise DegenerateMetricError(f"warp is not positive at r={r}")
    return (w,) + tuple(m.warp(r, d) for d in range(1, upto + 1))


def christoffels(m: WarpedMetric, r) -> ChristoffelTable:
    w, w1 = _warp_at(m, r, 1)
    return ChristoffelTable(0.0, 0.0, 0.0, -w * w1, w1 / w)


def hessian_radial(m: WarpedMetric, f: RadialProfile, r):
    """(dr⊗dr component, coefficient of g_fiber) of the Hessian of ``f``."""
    w, w1 = _warp_at(m, r, 1)
    return f(r, 2), f(r, 1) * w1 * w


def hessian_eigenvalues(m: WarpedMetric, f: RadialProfile, r):
    """Radial and tangential eigenvalues of g^{-1} Hess f."""
    w, w1 = _warp_at(m, r, 1)
    return f(r, 2), f(r, 1) * w1 / w


def laplacian(m: WarpedMetric, f: RadialProfile, r):
    rad, tan = hessian_eigenvalues(m, f, r)
    return rad + (m.n - 1) * tan


def ode_family_residual(m: WarpedMetric, f: RadialProfile, r):
    """``|f'' g_ij - (f'/2) d_r g_ij|`` per unit fiber metric, i.e. ``|f'' w^2 - f' w w'|``."""
    w, w1 = _warp_at(m, r, 1)
    return np.abs(f(r, 2) * w**2 - f(r, 1) * w * w1)


def ricci(m: WarpedMetric, r):
    w, w1, w2 = _warp_at(m, r)
    return ricci_components(m.n, m.fiber.R_sigma, w, w1, w2)


def scalar(m: WarpedMetric, r):
    w, w1, w2 = _warp_at(m, r)
    return scalar_curvature(m.n, m.fiber.R_sigma, w, w1, w2)


def schouten_spectrum(m: WarpedMetric, r):
    w, w1, w2 = _warp_at(m, r)
    ric_rr, ric_tan = ricci_components(m.n, m.fiber.R_sigma, w, w1, w2)
    R = scalar_curvature(m.n, m.fiber.R_sigma, w, w1, w2)
    return schouten_eigenvalues(m.n, ric_rr, ric_tan, R)


def sigma_k(m: WarpedMetric, r, k: int):
    if not 1 <= k <= m.n:
        raise InputError(f"sigma_k needs 1 <= k <= n, got k={k}, n={m.n}")
    mu_r, mu_t = schouten_spectrum(m, r)
    return elementary_symmetric(m.n, k, mu_r, mu_t)


def scalar_gradient(m: WarpedMetric, r):
    """dR/dr from the closed form, using w'''."""
    n, Rs = m.n, m.fiber.R_sigma
    w, w1, w2, w3 = _warp_at(m, r, 3)
    return (-2 * (n - 1) * (w3 / w - w2 * w1 / w**2)
            - 2 * (n - 1) * (n - 2) * w1 * w2 / w**2
            - 2 * (Rs - (n - 1) * (n - 2) * w1**2) * w1 / w**3)


def scalar_gradient_magnitude(m: WarpedMetric, r):
    """Sum of absolute values of the terms in :func:`scalar_gradient`.

    Near a closing the terms grow like 1/w^3 and cancel, so this is the scale
    against which rounding in dR/dr should be judged.
    """
    n, Rs = m.n, m.fiber.R_sigma
    w, w1, w2, w3 = _warp_at(m, r, 3)
    return (2 * (n - 1) * (np.abs(w3 / w) + np.abs(w2 * w1) / w**2)
            + 2 * (n - 1) * (n - 2) * np.abs(w1 * w2) / w**2
            + 2 * (np.abs(Rs) + (n - 1) * (n - 2) * w1**2) * np.abs(w1) / np.abs(w) ** 3)


def ricci_divergence_radial(m: WarpedMetric, r):
    """Radial component of div(Ric) for the diagonal Ricci tensor."""
    n = m.n
    w, w1, w2, w3 = _warp_at(m, r, 3)
    ric_rr, ric_tan = ricci_components(n, m.fiber.R_sigma, w, w1, w2)
    d_ric_rr = -(n - 1) * (w3 / w - w2 * w1 / w**2)
    return d_ric_rr + (n - 1) * (w1 / w) * (ric_rr - ric_tan)


def curvature_report(m: WarpedMetric, r, ks=(1,)) -> CurvatureReport:
    r = np.atleast_1d(np.asarray(r, dtype=float))
    w, w1, w2 = _warp_at(m, r)
    n, Rs = m.n, m.fiber.R_sigma
    ric_rr, ric_tan = ricci_components(n, Rs, w, w1, w2)
    R = scalar_curvature(n, Rs, w, w1, w2)
    mu_r, mu_t = schouten_eigenvalues(n, ric_rr, ric_tan, R)
    sig = {k: elementary_symmetric(n, k, mu_r, mu_t) for k in ks}
    return CurvatureReport(r, ric_rr, ric_tan, R, mu_r, mu_t, sig)


def interior_mask(m: WarpedMetric) -> np.ndarray:
    """Grid nodes where curvature may be evaluated.

    Excludes nodes where the warp vanishes and, for finite-difference warps,
    nodes within two stencil widths of a closing end.
    """
    w = m.warp.values
    mask = w > 1e-12 * np.max(np.abs(w))
    if not m.warp.is_analytic:
        rep = zeros_of(m.warp, 0)
        margin = 2 * stencil_sizes(3, m.warp.order, m.grid.uniform)[1]
        if rep.closes_lower:
            mask[:margin] = False
        if rep.closes_upper:
            mask[-margin:] = False
    return mask


def curvature_sweep(m: WarpedMetric, ks=(1,)) -> CurvatureReport:
    return curvature_report(m, m.grid.r[interior_mask(m)], ks)


def write_curvature_csv(report: CurvatureReport, path) -> None:
    ks = sorted(report.sigma)
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["r", "Ric_rr", "ric_tan", "R", "mu_r", "mu_t"] + [f"sigma_{k}" for k in ks])
        cols = [report.r, report.ric_rr, report.ric_tan, report.R, report.mu_r, report.mu_t]
        cols += [report.sigma[k] for k in ks]
        for row in zip(*cols):
            out.writerow([f"{x:.17g}" for x in row])
