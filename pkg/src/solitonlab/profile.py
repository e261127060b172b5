"""Radial scalar profiles: grids, derivatives, critical points, normalization.

A :class:`RadialProfile` carries a function of the radial coordinate together
with its first three derivatives, either from analytic callbacks or from
finite differences of sampled values.  The same type is used for the
potential ``f`` and for the warp ``w`` of a warped metric.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import InputError, PreconditionError

SPACINGS = ("uniform", "chebyshev", "tabulated")
FD_ORDERS = (2, 4, 6)

REGULARITY_THRESHOLD = 1e-8
CLOSING_THRESHOLD = 1e-6
CRITICAL_TOL = 1e-10


# ---------------------------------------------------------------------------
# finite-difference machinery
# ---------------------------------------------------------------------------

def fornberg_weights(z: float, x: np.ndarray, m: int) -> np.ndarray:
    """Finite-difference weights on arbitrary nodes (Fornberg 1988).

    Returns an array of shape ``(len(x), m + 1)``; column ``k`` holds the
    weights approximating the ``k``-th derivative at ``z``.
    """
    x = np.asarray(x, dtype=float)
    n = len(x)
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1] - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def _is_uniform(x: np.ndarray) -> bool:
    dx = np.diff(x)
    return bool(np.allclose(dx, dx[0], rtol=1e-10, atol=0.0))


def stencil_sizes(d: int, order: int, uniform: bool = True) -> tuple[int, int]:
    """(centered, boundary) stencil widths for derivative ``d`` at ``order``."""
    if uniform:
        centered = 2 * ((d + 1) // 2) - 1 + order
    else:
        centered = d + order
        centered += 1 - centered % 2
    return centered, max(centered, d + order)


def grid_derivative(x, y, d: int = 1, order: int = 4) -> np.ndarray:
    """``d``-th derivative of samples ``y`` on nodes ``x``.

    Centered stencils in the interior, one-sided stencils of the same order
    near the ends.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(x)
    uniform = _is_uniform(x)
    npts, nb = stencil_sizes(d, order, uniform)
    if n < nb:
        raise InputError(f"grid of {n} nodes too coarse for order-{order} stencil of derivative {d}")
    out = np.empty(n)
    half = npts // 2
    interior = np.arange(half, n - half)
    if uniform and len(interior):
        h = x[1] - x[0]
        w = fornberg_weights(0.0, h * np.arange(-half, half + 1), d)[:, d]
        windows = np.lib.stride_tricks.sliding_window_view(y, npts)
        out[half:n - half] = windows @ w
        todo = np.concatenate([np.arange(half), np.arange(n - half, n)])
    else:
        todo = np.arange(n)
    for i in todo:
        if half <= i < n - half:
            lo, size = i - half, npts
        else:
            size = nb
            lo = int(np.clip(i - size // 2, 0, n - size))
        sl = slice(lo, lo + size)
        out[i] = fornberg_weights(x[i], x[sl], d)[:, d] @ y[sl]
    return out


def lagrange_interpolate(x: np.ndarray, y: np.ndarray, xq, npts: int) -> np.ndarray:
    """Local Lagrange interpolation of ``y(x)`` at ``xq`` with ``npts`` nodes."""
    xq = np.atleast_1d(np.asarray(xq, dtype=float))
    n = len(x)
    npts = min(npts, n)
    idx = np.searchsorted(x, xq)
    start = np.clip(idx - npts // 2, 0, n - npts)
    cols = start[:, None] + np.arange(npts)
    X = x[cols]
    Y = y[cols]
    diff = xq[:, None] - X
    out = np.zeros(len(xq))
    for j in range(npts):
        lj = np.ones(len(xq))
        for k in range(npts):
            if k != j:
                lj *= diff[:, k] / (X[:, j] - X[:, k])
        out += lj * Y[:, j]
    hit = diff == 0.0
    rows = hit.any(axis=1)
    if rows.any():
        out[rows] = Y[rows][hit[rows]][: rows.sum()]
    return out


# ---------------------------------------------------------------------------
# grids and profiles
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class RadialGrid:
    """Nodes of the radial coordinate on ``[r_min, r_max]``."""

    r_min: float
    r_max: float
    nodes: int
    spacing: str = "uniform"
    explicit: tuple | None = field(default=None, repr=False, compare=False)
    r: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.spacing not in SPACINGS:
            raise InputError(f"unknown spacing {self.spacing!r}")
        if not (np.isfinite(self.r_min) and np.isfinite(self.r_max)) or self.r_min >= self.r_max:
            raise InputError(f"need finite r_min < r_max, got [{self.r_min}, {self.r_max}]")
        if self.nodes < 16:
            raise InputError(f"a grid needs at least 16 nodes, got {self.nodes}")
        if self.spacing == "uniform":
            r = np.linspace(self.r_min, self.r_max, self.nodes)
        elif self.spacing == "chebyshev":
            k = np.arange(self.nodes)
            r = self.r_min + 0.5 * (self.r_max - self.r_min) * (1.0 - np.cos(np.pi * k / (self.nodes - 1)))
            r[0], r[-1] = self.r_min, self.r_max
        else:
            if self.explicit is None:
                raise InputError("tabulated grid requires explicit nodes")
            r = np.asarray(self.explicit, dtype=float)
            if len(r) != self.nodes:
                raise InputError("explicit node count mismatch")
        if np.any(np.diff(r) <= 0):
            raise InputError("grid nodes must be strictly increasing")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_nodes(cls, nodes) -> "RadialGrid":
        nodes = np.asarray(nodes, dtype=float)
        if nodes.ndim != 1 or len(nodes) < 2:
            raise InputError("need a one-dimensional array of nodes")
        if not np.all(np.isfinite(nodes)):
            raise InputError("grid nodes must be finite")
        return cls(float(nodes[0]), float(nodes[-1]), len(nodes), "tabulated", tuple(nodes))

    @property
    def h(self) -> float:
        """Largest node spacing."""
        return float(np.max(np.diff(self.r)))

    @property
    def uniform(self) -> bool:
        return _is_uniform(self.r)

    def refined(self, factor: int = 2) -> "RadialGrid":
        if self.spacing == "tabulated":
            raise InputError("cannot refine a tabulated grid")
        return RadialGrid(self.r_min, self.r_max, factor * (self.nodes - 1) + 1, self.spacing)


def _as_array_callback(cb: Callable) -> Callable:
    def wrapped(r):
        r = np.asarray(r, dtype=float)
        return np.array(np.broadcast_to(np.asarray(cb(r), dtype=float), r.shape))
    return wrapped


class RadialProfile:
    """A radial function with derivatives up to order three.

    ``source`` is ``"analytic"`` (callbacks), ``"fd"`` (derivatives by finite
    differences of sampled values) or ``"tabulated"`` (all four arrays given,
    e.g. read from CSV).  Off-node evaluation of sampled profiles uses local
    Lagrange interpolation of the stored arrays.
    """

    def __init__(self, grid: RadialGrid, arrays: Sequence[np.ndarray], source: str,
                 order: int = 4, callbacks: Sequence[Callable] | None = None):
        if source not in ("analytic", "fd", "tabulated"):
            raise InputError(f"unknown derivative source {source!r}")
        if order not in FD_ORDERS:
            raise InputError(f"stencil order must be one of {FD_ORDERS}, got {order}")
        arrays = [np.array(a, dtype=float) for a in arrays]
        if len(arrays) != 4 or any(a.shape != grid.r.shape for a in arrays):
            raise InputError("profile needs four arrays matching the grid")
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise InputError("profile samples must be finite")
            a.setflags(write=False)
        self.grid = grid
        self.values, self.d1, self.d2, self.d3 = arrays
        self.source = source
        self.order = order
        self.callbacks = None if callbacks is None else tuple(callbacks)
        self.crosscheck = None
        if self.callbacks is not None:
            fd1 = grid_derivative(grid.r, self.values, 1, order)
            self.crosscheck = float(np.max(np.abs(fd1 - self.d1)[1:-1]))

    def __repr__(self):
        return (f"RadialProfile(source={self.source!r}, order={self.order}, "
                f"r=[{self.grid.r_min:g}, {self.grid.r_max:g}], nodes={self.grid.nodes})")

    @property
    def r(self) -> np.ndarray:
        return self.grid.r

    @property
    def is_analytic(self) -> bool:
        return self.callbacks is not None

    def nodal(self, d: int = 0) -> np.ndarray:
        return (self.values, self.d1, self.d2, self.d3)[d]

    def __call__(self, r, d: int = 0):
        """Evaluate the ``d``-th derivative at ``r`` (scalar or array)."""
        if not 0 <= d <= 3:
            raise InputError(f"derivative order {d} not available")
        scalar = np.ndim(r) == 0
        r_arr = np.asarray(r, dtype=float)
        if self.callbacks is not None:
            out = self.callbacks[d](r_arr)
        elif r_arr.shape == self.grid.r.shape and np.array_equal(r_arr, self.grid.r):
            out = self.nodal(d).copy()
        else:
            out = lagrange_interpolate(self.grid.r, self.nodal(d), r_arr.ravel(),
                                       self.order + 2).reshape(r_arr.shape)
        return float(out) if scalar else out

    def scaled(self, a: float, b: float = 0.0) -> "RadialProfile":
        """The profile of ``a * f + b``."""
        arrays = (a * self.values + b, a * self.d1, a * self.d2, a * self.d3)
        cbs = None
        if self.callbacks is not None:
            f0, f1, f2, f3 = self.callbacks
            cbs = (lambda r: a * f0(r) + b, lambda r: a * f1(r),
                   lambda r: a * f2(r), lambda r: a * f3(r))
        return RadialProfile(self.grid, arrays, self.source, self.order, cbs)


def analytic_profile(grid: RadialGrid, f: Callable, f1: Callable, f2: Callable, f3: Callable,
                     order: int = 4) -> RadialProfile:
    cbs = tuple(_as_array_callback(cb) for cb in (f, f1, f2, f3))
    arrays = [cb(grid.r) for cb in cbs]
    return RadialProfile(grid, arrays, "analytic", order, cbs)


def sampled_profile(grid: RadialGrid, values, order: int = 4) -> RadialProfile:
    values = np.asarray(values, dtype=float)
    if values.shape != grid.r.shape:
        raise InputError(f"{values.size} samples do not cover a grid of {grid.nodes} nodes")
    if not np.all(np.isfinite(values)):
        raise InputError("non-finite sample in profile input")
    if order not in FD_ORDERS:
        raise InputError(f"stencil order must be one of {FD_ORDERS}, got {order}")
    arrays = [values] + [grid_derivative(grid.r, values, d, order) for d in (1, 2, 3)]
    return RadialProfile(grid, arrays, "fd", order)


def build_profile(spec, grid: RadialGrid, order: int = 4) -> RadialProfile:
    """Build a profile from four analytic callbacks or from sampled values."""
    if isinstance(spec, (tuple, list)) and len(spec) == 4 and all(callable(s) for s in spec):
        try:
            return analytic_profile(grid, *spec, order=order)
        except (FloatingPointError, ZeroDivisionError) as exc:
            raise InputError(f"analytic callback failed on the grid: {exc}") from exc
    if callable(spec):
        raise InputError("analytic input needs callbacks for f, f', f'', f'''")
    return sampled_profile(grid, spec, order)


# ---------------------------------------------------------------------------
# normalization and critical points
# ---------------------------------------------------------------------------

def is_regular(p: RadialProfile, r0: float) -> bool:
    scale = float(np.max(np.abs(p.d1)))
    return abs(p(r0, 1)) > REGULARITY_THRESHOLD * scale


def normalize_at_regular_point(p: RadialProfile, r0: float) -> RadialProfile:
    """Rescale ``f`` so that ``f'(r0) = 1``."""
    if not p.grid.r_min <= r0 <= p.grid.r_max:
        raise PreconditionError(f"r0={r0} lies outside the grid")
    if not is_regular(p, r0):
        raise PreconditionError(f"r0={r0} is a critical point of the profile")
    return p.scaled(1.0 / p(r0, 1))


@dataclass(frozen=True)
class CriticalPointReport:
    roots: tuple
    brackets: tuple
    closes_lower: bool
    closes_upper: bool
    residuals: tuple = ()

    @property
    def count(self) -> int:
        """Interior roots plus closing ends."""
        return len(self.roots) + int(self.closes_lower) + int(self.closes_upper)

    @property
    def valid_as_soliton(self) -> bool:
        return self.count <= 2


def zeros_of(p: RadialProfile, d: int, tol: float = CRITICAL_TOL) -> CriticalPointReport:
    """Sign changes of the ``d``-th derivative plus closing flags at the ends."""
    v = p.nodal(d).copy()
    r = p.grid.r
    scale = float(np.max(np.abs(v)))
    if scale == 0.0:
        return CriticalPointReport((), (), True, True)
    closes = [abs(p(r[0], d)) < CLOSING_THRESHOLD * scale,
              abs(p(r[-1], d)) < CLOSING_THRESHOLD * scale]
    if closes[0]:
        v[0] = 0.0
    if closes[1]:
        v[-1] = 0.0
    s = np.sign(v)
    roots, brackets, res = [], [], []
    for i in np.flatnonzero(s[1:-1] == 0) + 1:
        roots.append(float(r[i]))
        brackets.append((float(r[i]), float(r[i])))
        res.append(0.0)
    for i in np.flatnonzero(s[:-1] * s[1:] < 0):
        a, b = float(r[i]), float(r[i + 1])
        root = brentq(lambda x: p(x, d), a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if abs(p(root, d)) > tol:
            # interpolant noise: fall back to bisection on the sign
            lo, hi = a, b
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                if np.sign(p(mid, d)) == np.sign(p(lo, d)):
                    lo = mid
                else:
                    hi = mid
            root = 0.5 * (lo + hi)
        roots.append(root)
        brackets.append((a, b))
        res.append(abs(p(root, d)))
    order = np.argsort(roots)
    return CriticalPointReport(tuple(roots[i] for i in order), tuple(brackets[i] for i in order),
                               bool(closes[0]), bool(closes[1]), tuple(res[i] for i in order))


def find_critical_points(p: RadialProfile, tol: float = CRITICAL_TOL) -> CriticalPointReport:
    """Critical points of ``f`` (zeros of ``f'``), with endpoint closing flags."""
    return zeros_of(p, 1, tol)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

PROFILE_COLUMNS = ("r", "f", "f1", "f2", "f3")


def write_profile_csv(p: RadialProfile, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(PROFILE_COLUMNS)
        for row in zip(p.grid.r, p.values, p.d1, p.d2, p.d3):
            w.writerow([f"{x:.17g}" for x in row])


def read_profile_csv(path, order: int = 4) -> RadialProfile:
    """Profile from CSV: full jets ``r,f,f1,f2,f3`` or values only as ``r,<name>``.

    Values-only files become sampled profiles with finite-difference derivatives.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise InputError(f"{path}: empty profile CSV") from None
        header = tuple(h.strip() for h in header)
        values_only = len(header) == 2 and header[0] == "r"
        if header != PROFILE_COLUMNS and not values_only:
            raise InputError(f"{path}: expected header {','.join(PROFILE_COLUMNS)} or r,<values>, "
                             f"got {','.join(header)}")
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or row[0].startswith("#"):
                continue
            try:
                rows.append([float(x) for x in row])
            except ValueError:
                raise InputError(f"{path}:{lineno}: non-numeric entry") from None
            if len(row) != len(header):
                raise InputError(f"{path}:{lineno}: expected {len(header)} columns")
    data = np.array(rows, dtype=float)
    if len(data) < 16:
        raise InputError(f"{path}: need at least 16 rows")
    grid = RadialGrid.from_nodes(data[:, 0])
    if values_only:
        return sampled_profile(grid, data[:, 1], order)
    return RadialProfile(grid, data[:, 1:].T, "tabulated", order)
