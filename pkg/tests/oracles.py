"""Independent reference computations for the test suite.

Nothing here imports the package; each oracle recomputes a quantity from
first principles so a shared bug cannot make both sides agree.
"""

from __future__ import annotations

import json
import math
from itertools import product
from pathlib import Path

import numpy as np

FROZEN = Path(__file__).parent / "data" / "frozen_oracles.json"

# fourth-order central first derivative
_D1 = {-2: 1 / 12, -1: -8 / 12, 1: 8 / 12, 2: -1 / 12}


# ---------------------------------------------------------------------------
# brute-force curvature from metric components (n = 3, coordinates r, theta, phi)
# ---------------------------------------------------------------------------

def warped_metric_3d(w):
    """g(x) for ds^2 = dr^2 + w(r)^2 (dtheta^2 + sin^2 theta dphi^2)."""
    def g(x):
        r, th, _ = x
        return np.diag([1.0, w(r) ** 2, w(r) ** 2 * math.sin(th) ** 2])
    return g


def _partial(fn, x, i, h):
    acc = 0.0
    for k, c in _D1.items():
        y = np.array(x, dtype=float)
        y[i] += k * h
        acc = acc + c * fn(y)
    return acc / h


def christoffel_fd(g, x, h):
    """Gamma^a_bc at x with metric derivatives by fourth-order central differences."""
    dim = len(x)
    dg = [_partial(g, x, i, h) for i in range(dim)]  # dg[c][a, b] = d_c g_ab
    ginv = np.linalg.inv(g(x))
    gam = np.zeros((dim, dim, dim))
    for a, b, c in product(range(dim), repeat=3):
        gam[a, b, c] = 0.5 * sum(ginv[a, d] * (dg[b][d, c] + dg[c][d, b] - dg[d][b, c]) for d in range(dim))
    return gam


def ricci_fd(g, x, h):
    """Ricci tensor R_bd = R^a_bad from FD Christoffels and their FD derivatives."""
    dim = len(x)
    gam = christoffel_fd(g, x, h)
    dgam = [_partial(lambda y: christoffel_fd(g, y, h), x, i, h) for i in range(dim)]
    ric = np.zeros((dim, dim))
    for b, d in product(range(dim), repeat=2):
        tot = 0.0
        for a in range(dim):
            tot += dgam[a][a, d, b] - dgam[d][a, a, b]
            for e in range(dim):
                tot += gam[a, a, e] * gam[e, d, b] - gam[a, d, e] * gam[e, a, b]
        ric[b, d] = tot
    return ric


def brute_force_curvature(w, r, theta=math.pi / 3, h=None):
    """(Ric_rr, tangential Ricci eigenvalue, R) at radius r."""
    h = h if h is not None else 1e-2
    g = warped_metric_3d(w)
    x = np.array([r, theta, 0.3])
    ric = ricci_fd(g, x, h)
    scal = float(np.trace(np.linalg.inv(g(x)) @ ric))
    return float(ric[0, 0]), float(ric[1, 1] / w(r) ** 2), scal


# ---------------------------------------------------------------------------
# scalar oracles
# ---------------------------------------------------------------------------

def bisect_root(fn, lo, hi, iters=200):
    flo = fn(lo)
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        fm = fn(mid)
        if fm == 0.0:
            return mid
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def sigma_k_from_spectrum(eigs, k):
    """Elementary symmetric polynomial from the characteristic-polynomial coefficients."""
    coeffs = np.poly(np.asarray(eigs, dtype=float))  # prod (x - e_i)
    return float((-1) ** k * coeffs[k])


def sigma_warp_bruteforce(n, w, w1, w2, k, R_sigma=None):
    """sigma_k of the Schouten spectrum, assembling the full n x n Ricci matrix."""
    Rs = (n - 1) * (n - 2) if R_sigma is None else R_sigma
    ric = np.zeros((n, n))
    ric[0, 0] = -(n - 1) * w2 / w
    for i in range(1, n):
        ric[i, i] = (Rs / (n - 1) - (n - 2) * w1**2 - w * w2) / w**2
    R = np.trace(ric)
    A = (ric - R / (2 * (n - 1)) * np.eye(n)) / (n - 2)
    return sigma_k_from_spectrum(np.diag(A), k)


def sphere_volume(n):
    """Volume of the unit n-sphere via the recursion V_n = 2 pi V_{n-2} / (n-1)."""
    vols = {0: 2.0, 1: 2 * math.pi}
    for d in range(2, n + 1):
        vols[d] = 2 * math.pi * vols[d - 2] / (d - 1)
    return vols[n]


def gudermannian(x):
    return 2.0 * math.atan(math.tanh(0.5 * x))


# ---------------------------------------------------------------------------
# frozen values
# ---------------------------------------------------------------------------

def compute_frozen() -> dict:
    out = {"brute_force_n3": {}, "sigma_bruteforce": [], "sphere_volume": {}, "charts": {}}
    warps = {"sin": math.sin, "cosh": math.cosh}
    for name, r in (("sin", 0.7), ("sin", 2.1), ("cosh", -0.8), ("cosh", 1.3)):
        out["brute_force_n3"][f"{name}@{r}"] = brute_force_curvature(warps[name], r)
    for n, k, w, w1, w2 in ((4, 2, 0.7, 0.3, -0.2), (5, 3, 1.3, -0.4, 0.5), (6, 2, 2.0, 0.1, 0.0)):
        out["sigma_bruteforce"].append([n, k, w, w1, w2, sigma_warp_bruteforce(n, w, w1, w2, k)])
    for n in (2, 3, 4, 5, 6):
        out["sphere_volume"][str(n)] = sphere_volume(n)
    out["charts"]["gudermannian_2"] = gudermannian(2.0)
    out["charts"]["exp_t_of_r_3"] = 1.0 - math.exp(-3.0)
    out["charts"]["sinh_t_ratio"] = math.tanh(1.0) / math.tanh(0.5)
    return out


if __name__ == "__main__":
    FROZEN.parent.mkdir(exist_ok=True)
    FROZEN.write_text(json.dumps(compute_frozen(), indent=2, sort_keys=True) + "\n")
    print(f"wrote {FROZEN}")
