"""Built-in analytic radial families used by the CLI and the test suite.

Each family is ``g(r)`` with parameters; :func:`derivatives` returns callbacks
for ``g, g', g'', g''', g''''`` and the antiderivative ``G`` with ``G(0)``
not normalized.
"""

from __future__ import annotations

import numpy as np

from .errors import InputError
from .profile import RadialGrid, RadialProfile, analytic_profile

NAMES = ("linear", "quadratic", "sin", "sinh", "cosh", "exp")

_DEFAULTS = {
    "linear": {"a": 0.0, "b": 1.0},                # a + b r
    "quadratic": {"a": 0.0, "b": 0.0, "c": 1.0},   # a + b r + c r^2
    "sin": {"amp": 1.0, "k": 1.0, "phase": 0.0},   # amp sin(k r + phase)
    "sinh": {"amp": 1.0, "k": 1.0, "phase": 0.0},
    "cosh": {"amp": 1.0, "k": 1.0, "phase": 0.0},
    "exp": {"amp": 1.0, "k": 1.0, "phase": 0.0},
}


def _params(name, params):
    if name not in _DEFAULTS:
        raise InputError(f"unknown analytic profile {name!r}; choose from {', '.join(NAMES)}")
    params = dict(params or {})
    unknown = set(params) - set(_DEFAULTS[name])
    if unknown:
        raise InputError(f"profile {name!r} has no parameter(s) {sorted(unknown)}")
    return {**_DEFAULTS[name], **{k: float(v) for k, v in params.items()}}


def derivatives(name: str, params: dict | None = None) -> list:
    """Callbacks ``[G, g, g', g'', g''']`` for family ``name``."""
    p = _params(name, params)
    if name == "linear":
        a, b = p["a"], p["b"]
        return [lambda r: a * r + 0.5 * b * r**2, lambda r: a + b * r, lambda r: b + 0 * r,
                lambda r: 0 * r, lambda r: 0 * r]
    if name == "quadratic":
        a, b, c = p["a"], p["b"], p["c"]
        return [lambda r: a * r + 0.5 * b * r**2 + c * r**3 / 3, lambda r: a + b * r + c * r**2,
                lambda r: b + 2 * c * r, lambda r: 2 * c + 0 * r, lambda r: 0 * r]
    A, k, ph = p["amp"], p["k"], p["phase"]
    if name == "exp":
        e = lambda r: np.exp(k * r + ph)
        return [lambda r: A / k * e(r), lambda r: A * e(r), lambda r: A * k * e(r),
                lambda r: A * k**2 * e(r), lambda r: A * k**3 * e(r)]
    if k == 0.0:
        raise InputError(f"profile {name!r} needs k != 0")
    if name == "sin":
        s = lambda r: np.sin(k * r + ph)
        c = lambda r: np.cos(k * r + ph)
        return [lambda r: -A / k * c(r), lambda r: A * s(r), lambda r: A * k * c(r),
                lambda r: -A * k**2 * s(r), lambda r: -A * k**3 * c(r)]
    s = lambda r: np.sinh(k * r + ph)
    c = lambda r: np.cosh(k * r + ph)
    if name == "sinh":
        return [lambda r: A / k * c(r), lambda r: A * s(r), lambda r: A * k * c(r),
                lambda r: A * k**2 * s(r), lambda r: A * k**3 * c(r)]
    return [lambda r: A / k * s(r), lambda r: A * c(r), lambda r: A * k * s(r),
            lambda r: A * k**2 * c(r), lambda r: A * k**3 * s(r)]


def warp_profile(name: str, grid: RadialGrid, params: dict | None = None, order: int = 4) -> RadialProfile:
    """Profile of the family itself (used as a warp)."""
    cb = derivatives(name, params)
    return analytic_profile(grid, *cb[1:], order=order)


def potential_profile(name: str, grid: RadialGrid, params: dict | None = None, order: int = 4) -> RadialProfile:
    """Profile of the antiderivative, i.e. a potential whose derivative is the family."""
    cb = derivatives(name, params)
    return analytic_profile(grid, *cb[:4], order=order)
