import math
import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from solitonlab import families  # noqa: E402
from solitonlab.geometry import FiberDescriptor, WarpedMetric  # noqa: E402
from solitonlab.profile import RadialGrid, analytic_profile  # noqa: E402

PI = math.pi


def sphere_pair(n, nodes=2048, r_min=0.0, r_max=PI):
    """Unit round sphere metric with the potential -cos r."""
    grid = RadialGrid(r_min, r_max, nodes)
    m = WarpedMetric(n, families.warp_profile("sin", grid), FiberDescriptor.round_sphere(n - 1))
    f = families.potential_profile("sin", grid)
    return m, f


def metric_from(name, n, grid, params=None, fiber=None, order=4):
    fiber = fiber or FiberDescriptor.round_sphere(n - 1)
    return WarpedMetric(n, families.warp_profile(name, grid, params, order), fiber)


def trig_warp(coeffs):
    """Callbacks for b(s) = sum_j a_j sin(j s) and its first three derivatives."""
    js = np.arange(1, len(coeffs) + 1, dtype=float)
    a = np.asarray(coeffs, dtype=float)

    def make(d):
        def fn(s):
            s = np.asarray(s, dtype=float)[..., None]
            x = js * s
            base = (np.sin, np.cos, lambda t: -np.sin(t), lambda t: -np.cos(t))[d](x)
            return np.sum(a * js**d * base, axis=-1)
        return fn

    return [make(d) for d in range(4)]


def random_closed_warp(seed, size=5, amp=0.02):
    """Seeded smooth warp on [0, pi] closing smoothly at both ends (odd sine modes)."""
    rng = np.random.default_rng(seed)
    coeffs = np.zeros(2 * size - 1)
    for j in range(3, 2 * size, 2):
        coeffs[j - 1] = amp * rng.uniform(-1.0, 1.0) / j
    coeffs[0] = 1.0 - sum(j * coeffs[j - 1] for j in range(3, 2 * size, 2))
    return coeffs


def closed_warp_profile(grid, coeffs, order=4):
    return analytic_profile(grid, *trig_warp(coeffs), order=order)


@pytest.fixture
def sphere3():
    return sphere_pair(3)


# ---------------------------------------------------------------------------
# acceptance summary: one line per criterion
# ---------------------------------------------------------------------------

_acceptance = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py" in report.nodeid and report.when == "call":
        _acceptance[report.nodeid] = report.outcome
    elif "test_acceptance.py" in report.nodeid and report.when == "setup" and report.outcome != "passed":
        _acceptance[report.nodeid] = report.outcome


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for nodeid, outcome in sorted(_acceptance.items()):
        name = nodeid.split("::")[-1]
        terminalreporter.write_line(f"{'PASS' if outcome == 'passed' else 'FAIL'}  {name}")
