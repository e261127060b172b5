"""Residual checks for soliton structures and the case classification.

A pair (warped metric, radial potential) is a conformal gradient soliton when
the Hessian of the potential is a multiple of the metric, i.e. when its radial
and tangential eigenvalues agree.  The structure-specific checks compare both
eigenvalues with a prescribed multiple phi (Yamabe, k-Yamabe, ...).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Union

import numpy as np

from . import geometry as geo
from .errors import InputError, PreconditionError
from .profile import RadialProfile, find_critical_points, grid_derivative

ANALYTIC_TOL = 1e-8
RICCI_TOL = 1e-8


# ---------------------------------------------------------------------------
# soliton structures
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Conformal:
    """Hess f = phi g with a prescribed phi (None: phi = Laplacian / n)."""

    phi: RadialProfile | None = None


@dataclass(frozen=True)
class Yamabe:
    lam: float


@dataclass(frozen=True)
class KYamabe:
    k: int
    lam: float

    def __post_init__(self):
        if self.k < 1:
            raise InputError(f"k-Yamabe needs k >= 1, got {self.k}")


@dataclass(frozen=True)
class GeneralizedSigmaK:
    """Hess f = psi(sigma_k) g; ``psi`` must be strictly monotone."""

    psi: Callable
    k: int
    monotone: bool = True

    def __post_init__(self):
        if not self.monotone:
            raise InputError("psi must be declared strictly monotone")
        if self.k < 1:
            raise InputError(f"k must be >= 1, got {self.k}")


SolitonSpec = Union[Conformal, Yamabe, KYamabe, GeneralizedSigmaK]


@dataclass
class ResidualReport:
    r: np.ndarray
    radial: np.ndarray
    tangential: np.ndarray
    tol: float
    sup_radial: float = field(init=False)
    sup_tangential: float = field(init=False)
    l2_radial: float = field(init=False)
    l2_tangential: float = field(init=False)

    def __post_init__(self):
        self.sup_radial = float(np.max(self.radial)) if len(self.radial) else 0.0
        self.sup_tangential = float(np.max(self.tangential)) if len(self.tangential) else 0.0
        self.l2_radial = _l2(self.r, self.radial)
        self.l2_tangential = _l2(self.r, self.tangential)

    @property
    def sup(self) -> float:
        return max(self.sup_radial, self.sup_tangential)

    @property
    def passed(self) -> bool:
        return self.sup_radial < self.tol and self.sup_tangential < self.tol

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(["r", "radial", "tangential"])
            for row in zip(self.r, self.radial, self.tangential):
                out.writerow([f"{x:.17g}" for x in row])


def _l2(r, v):
    if len(r) < 2:
        return float(np.abs(v).max()) if len(v) else 0.0
    return float(np.sqrt(np.trapezoid(v**2, r)))


def _shared_nodes(m: geo.WarpedMetric, f: RadialProfile) -> np.ndarray:
    if f.grid.nodes != m.grid.nodes or not np.allclose(f.grid.r, m.grid.r, rtol=0, atol=1e-12):
        raise InputError("potential and metric must share a grid")
    return m.grid.r[geo.interior_mask(m)]


def default_tolerance(m: geo.WarpedMetric, f: RadialProfile, scale: float = 1.0) -> float:
    """1e-8 with analytic derivatives, else 10 h^order times the residual scale."""
    if f.is_analytic and m.warp.is_analytic:
        return ANALYTIC_TOL
    order = min(f.order, m.warp.order)
    return 10.0 * m.grid.h**order * max(scale, 1.0)


def conformal_residual(m: geo.WarpedMetric, f: RadialProfile, tol: float | None = None) -> ResidualReport:
    """Pointwise deviation of both Hessian eigenvalues from Laplacian / n."""
    r = _shared_nodes(m, f)
    rad, tan = geo.hessian_eigenvalues(m, f, r)
    phi = (rad + (m.n - 1) * tan) / m.n
    if tol is None:
        tol = default_tolerance(m, f, float(np.max(np.abs([rad, tan]))))
    return ResidualReport(r, np.abs(rad - phi), np.abs(tan - phi), tol)


def target_phi(m: geo.WarpedMetric, spec: SolitonSpec, r) -> np.ndarray:
    """The multiple phi that ``spec`` prescribes for Hess f at ``r``."""
    if isinstance(spec, Conformal):
        if spec.phi is None:
            raise InputError("Conformal spec without phi; use conformal_residual")
        return spec.phi(r)
    if isinstance(spec, Yamabe):
        return geo.scalar(m, r) - spec.lam
    if isinstance(spec, KYamabe):
        return 2 * (m.n - 1) * (geo.sigma_k(m, r, spec.k) - spec.lam)
    if isinstance(spec, GeneralizedSigmaK):
        return np.asarray(spec.psi(geo.sigma_k(m, r, spec.k)), dtype=float)
    raise InputError(f"unknown soliton spec {spec!r}")


def soliton_residual(m: geo.WarpedMetric, f: RadialProfile, spec: SolitonSpec,
                     tol: float | None = None) -> ResidualReport:
    if isinstance(spec, Conformal) and spec.phi is None:
        return conformal_residual(m, f, tol)
    r = _shared_nodes(m, f)
    rad, tan = geo.hessian_eigenvalues(m, f, r)
    phi = target_phi(m, spec, r)
    if tol is None:
        tol = default_tolerance(m, f, float(np.max(np.abs([rad, tan, phi]))))
    return ResidualReport(r, np.abs(rad - phi), np.abs(tan - phi), tol)


def check_identity_eq2(m: geo.WarpedMetric, f: RadialProfile, phi: RadialProfile) -> float:
    """sup |(n-1) phi' + Ric_rr f'|, the radial part of (n-1) grad phi = -Ric(grad f)."""
    r = _shared_nodes(m, f)
    ric_rr, _ = geo.ricci(m, r)
    return float(np.max(np.abs((m.n - 1) * phi(r, 1) + ric_rr * f(r, 1))))


def check_kazdan_warner_pointwise(m: geo.WarpedMetric, f: RadialProfile, k: int, order: int = 6) -> float:
    """sup |2(n-1)^2 f' (sigma_k)' + Ric_rr f'^2| over interior nodes.

    This vanishes exactly when phi = 2(n-1)(sigma_k - lambda) satisfies the
    radial identity, i.e. for k-Yamabe potentials.  (sigma_k)' is taken by
    finite differences of sigma_k on the grid.
    """
    r = _shared_nodes(m, f)
    sig = geo.sigma_k(m, r, k)
    dsig = grid_derivative(r, sig, 1, order)
    ric_rr, _ = geo.ricci(m, r)
    fp = f(r, 1)
    return float(np.max(np.abs(2 * (m.n - 1) ** 2 * fp * dsig + ric_rr * fp**2)))


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

class Case(str, Enum):
    CASE1 = "Case1"
    CASE1_PRIME = "Case1Prime"
    CASE2 = "Case2"
    CASE2_PRIME = "Case2Prime"
    CASE3 = "Case3"
    INVALID = "Invalid"


ZERO_EIGENVALUE_NOTE = "Ricci tensor has a zero eigenvalue (radial direction) at every point"


@dataclass
class ClassificationResult:
    case: Case
    critical: object
    ricci_nonnegative: bool
    min_ricci: float
    residual: ResidualReport
    notes: list = field(default_factory=list)

    @property
    def critical_count(self) -> int:
        return self.critical.count


def classify(m: geo.WarpedMetric, f: RadialProfile, tol: float | None = None,
             ricci_tol: float = RICCI_TOL) -> ClassificationResult:
    """Case of the (metric, potential) pair by critical points and Ricci sign."""
    res = conformal_residual(m, f, tol)
    crit = find_critical_points(f)
    curv = geo.curvature_sweep(m)
    min_ric = curv.min_ricci
    nonneg = min_ric >= -ricci_tol
    notes = []
    if not res.passed:
        notes.append(f"not a conformal gradient soliton: residual {res.sup:.3e} >= {res.tol:.1e}")
        return ClassificationResult(Case.INVALID, crit, nonneg, min_ric, res, notes)
    if crit.count > 2:
        notes.append(f"{crit.count} critical points; a conformal soliton has at most two")
        return ClassificationResult(Case.INVALID, crit, nonneg, min_ric, res, notes)

    if crit.count == 0:
        case = Case.CASE1
        if nonneg:
            # f' is concave and positive; on a complete line that forces f' constant
            fp = f.d1
            spread = float(np.max(fp) - np.min(fp)) / float(np.max(np.abs(fp)))
            if spread <= max(res.tol, 1e-8):
                case = Case.CASE1_PRIME
                notes.append(ZERO_EIGENVALUE_NOTE)
            else:
                notes.append("nonnegative Ricci but non-constant f' on the grid: "
                             "a concave positive f' cannot extend to the whole line")
    elif crit.count == 1:
        case = Case.CASE2_PRIME if nonneg else Case.CASE2
    else:
        case = Case.CASE3
        notes.append("compact: closes at both ends")
    if crit.roots:
        notes.append("interior critical point(s) at r = " + ", ".join(f"{x:.6g}" for x in crit.roots))
    return ClassificationResult(case, crit, nonneg, min_ric, res, notes)
