import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from solitonlab.errors import InputError, PreconditionError
from solitonlab.profile import (
    RadialGrid,
    analytic_profile,
    build_profile,
    find_critical_points,
    fornberg_weights,
    grid_derivative,
    normalize_at_regular_point,
    read_profile_csv,
    sampled_profile,
    write_profile_csv,
)

PI = math.pi


def _cos_potential(grid, scale=1.0):
    return analytic_profile(grid, lambda r: -scale * np.cos(r), lambda r: scale * np.sin(r),
                            lambda r: scale * np.cos(r), lambda r: -scale * np.sin(r))


# ---------------------------------------------------------------------------
# grids
# ---------------------------------------------------------------------------

def test_grid_rejects_bad_bounds_and_small_node_counts():
    with pytest.raises(InputError):
        RadialGrid(1.0, 1.0, 32)
    with pytest.raises(InputError):
        RadialGrid(0.0, 1.0, 15)
    with pytest.raises(InputError):
        RadialGrid(0.0, math.inf, 32)
    with pytest.raises(InputError):
        RadialGrid(0.0, 1.0, 32, "random")


def test_grid_nodes_are_read_only_and_increasing():
    for spacing in ("uniform", "chebyshev"):
        g = RadialGrid(-2.0, 3.0, 40, spacing)
        assert g.r[0] == -2.0 and g.r[-1] == 3.0
        assert np.all(np.diff(g.r) > 0)
        with pytest.raises(ValueError):
            g.r[0] = 5.0


def test_tabulated_grid_requires_increasing_nodes():
    with pytest.raises(InputError):
        RadialGrid.from_nodes(np.r_[np.linspace(0, 1, 20), 0.5])
    g = RadialGrid.from_nodes(np.linspace(0, 1, 20) ** 2)
    assert g.spacing == "tabulated" and not g.uniform


# ---------------------------------------------------------------------------
# finite differences
# ---------------------------------------------------------------------------

def test_fornberg_reproduces_classical_central_stencils():
    x = np.array([-1.0, 0.0, 1.0])
    w = fornberg_weights(0.0, x, 2)
    np.testing.assert_allclose(w[:, 1], [-0.5, 0.0, 0.5], atol=1e-15)
    np.testing.assert_allclose(w[:, 2], [1.0, -2.0, 1.0], atol=1e-15)
    x5 = np.arange(-2.0, 3.0)
    np.testing.assert_allclose(fornberg_weights(0.0, x5, 1)[:, 1], [1 / 12, -8 / 12, 0, 8 / 12, -1 / 12], atol=1e-15)


@pytest.mark.parametrize("order", [2, 4, 6])
def test_fd_is_exact_on_polynomials_of_matching_degree(order):
    x = np.linspace(-1.0, 2.0, 40)
    y = x ** (order)  # derivative stencil of accuracy `order` is exact for degree <= order
    np.testing.assert_allclose(grid_derivative(x, y, 1, order), order * x ** (order - 1), atol=1e-9)


def test_build_profile_linear_analytic():
    g = RadialGrid(-5.0, 5.0, 256)
    p = build_profile((lambda r: r, lambda r: 1.0, lambda r: 0.0, lambda r: 0.0), g)
    assert np.all(p.d1 == 1.0) and np.all(p.d2 == 0.0) and np.all(p.d3 == 0.0)
    assert p.is_analytic and p.crosscheck < 1e-12


def test_build_profile_cosine_fd_order4_matches_sine():
    errs = []
    for nodes in (101, 201, 401):
        g = RadialGrid(0.1, PI - 0.1, nodes)
        p = build_profile(-np.cos(g.r), g, order=4)
        errs.append(np.max(np.abs(p.d1 - np.sin(g.r))))
        assert errs[-1] <= 0.1 * g.h**4
    assert errs[0] / errs[2] > 2 ** 3.5 * 2 ** 3.5


def test_build_profile_cubic_second_derivative_order2():
    for nodes in (51, 101):
        g = RadialGrid(0.0, 2.0, nodes)
        p = build_profile(g.r**3, g, order=2)
        assert abs(p(1.0, 2) - 6.0) < 10 * g.h**2


@pytest.mark.parametrize("order", [2, 4, 6])
def test_observed_order_within_half_of_nominal(order):
    """4x refinement: log4 of the error ratio is the observed order.

    Grids are coarse enough that truncation, not rounding, dominates.
    """
    fn = np.sin
    errs = {}
    for nodes in (21, 81):
        g = RadialGrid(0.0, 2.0, nodes)
        for d in (1, 2, 3):
            exact = (np.cos, lambda r: -np.sin(r), lambda r: -np.cos(r))[d - 1](g.r)
            errs[(nodes, d)] = np.max(np.abs(grid_derivative(g.r, fn(g.r), d, order) - exact))
    for d in (1, 2, 3):
        observed = math.log(errs[(21, d)] / errs[(81, d)], 4)
        assert observed > order - 0.5, (d, observed)


def test_sampled_input_errors():
    g = RadialGrid(0.0, 1.0, 32)
    with pytest.raises(InputError):
        sampled_profile(g, np.r_[np.ones(31), np.nan])
    with pytest.raises(InputError):
        sampled_profile(g, np.ones(20))
    with pytest.raises(InputError):
        sampled_profile(g, np.ones(32), order=3)
    with pytest.raises(InputError):
        build_profile(lambda r: r, g)


def test_grid_too_coarse_for_stencil():
    g = RadialGrid(0.0, 1.0, 16)
    with pytest.raises(InputError):
        grid_derivative(g.r[:5], g.r[:5] ** 2, 3, 6)


def test_off_node_evaluation_interpolates_sampled_profiles():
    g = RadialGrid(0.0, PI, 201)
    p = sampled_profile(g, np.sin(g.r), order=6)
    xq = np.array([0.123, 1.0, 2.5])
    np.testing.assert_allclose(p(xq), np.sin(xq), atol=1e-11)
    np.testing.assert_allclose(p(xq, 1), np.cos(xq), atol=1e-8)


# ---------------------------------------------------------------------------
# normalization
# ---------------------------------------------------------------------------

def test_normalize_examples():
    g = RadialGrid(-1.0, 1.0, 64)
    p = analytic_profile(g, lambda r: 2 * r, lambda r: 2.0, lambda r: 0.0, lambda r: 0.0)
    q = normalize_at_regular_point(p, 0.0)
    np.testing.assert_allclose(q.values, g.r, atol=1e-15)

    g2 = RadialGrid(0.0, PI, 64)
    unit = _cos_potential(g2)
    np.testing.assert_allclose(normalize_at_regular_point(unit, PI / 2).values, unit.values, atol=1e-15)
    triple = _cos_potential(g2, 3.0)
    np.testing.assert_allclose(normalize_at_regular_point(triple, PI / 2).values, -np.cos(g2.r), atol=1e-15)
    np.testing.assert_allclose(normalize_at_regular_point(triple, PI / 2)(1.0, 1), math.sin(1.0), atol=1e-15)


def test_normalize_rejects_critical_points_and_outside():
    g = RadialGrid(0.0, PI, 64)
    p = _cos_potential(g)
    with pytest.raises(PreconditionError):
        normalize_at_regular_point(p, 0.0)
    with pytest.raises(PreconditionError):
        normalize_at_regular_point(p, 4.0)


@settings(max_examples=40, deadline=None)
@given(a=st.floats(0.1, 10.0), b=st.floats(-5, 5), r0=st.floats(0.3, 2.8))
def test_normalize_is_idempotent(a, b, r0):
    g = RadialGrid(0.0, PI, 64)
    p = _cos_potential(g).scaled(a, b)
    once = normalize_at_regular_point(p, r0)
    twice = normalize_at_regular_point(once, r0)
    np.testing.assert_allclose(twice.values, once.values, rtol=1e-14, atol=1e-14)
    assert abs(once(r0, 1) - 1.0) < 1e-14


# ---------------------------------------------------------------------------
# critical points
# ---------------------------------------------------------------------------

def test_critical_points_examples():
    g = RadialGrid(-3.0, 3.0, 64)
    line = analytic_profile(g, lambda r: r, lambda r: 1.0, lambda r: 0.0, lambda r: 0.0)
    rep = find_critical_points(line)
    assert rep.count == 0 and not rep.closes_lower and not rep.closes_upper

    g2 = RadialGrid(0.0, 10.0, 64)
    quad = analytic_profile(g2, lambda r: r**2 / 2, lambda r: r, lambda r: 1.0, lambda r: 0.0)
    rep = find_critical_points(quad)
    assert rep.count == 1 and rep.closes_lower and not rep.closes_upper

    g3 = RadialGrid(0.0, PI, 64)
    rep = find_critical_points(_cos_potential(g3))
    assert rep.count == 2 and rep.closes_lower and rep.closes_upper and rep.roots == ()


def test_interior_roots_are_refined_and_bracketed():
    g = RadialGrid(0.0, 10.0, 73)
    p = analytic_profile(g, lambda r: -np.cos(r), np.sin, np.cos, lambda r: -np.sin(r))
    rep = find_critical_points(p)
    np.testing.assert_allclose(rep.roots, [PI, 2 * PI, 3 * PI], atol=1e-12)
    assert rep.closes_lower and not rep.closes_upper
    assert not rep.valid_as_soliton
    for root, (a, b), res in zip(rep.roots, rep.brackets, rep.residuals):
        assert a <= root <= b and res < 1e-10
    assert list(rep.roots) == sorted(rep.roots)


def test_sampled_profile_roots_meet_tolerance():
    g = RadialGrid(0.5, 5.0, 200)
    p = sampled_profile(g, (g.r - 2.0) ** 2 * (g.r + 1.0), order=6)
    rep = find_critical_points(p)
    assert len(rep.roots) == 1 and abs(rep.roots[0] - 2.0) < 1e-8


@settings(max_examples=40, deadline=None)
@given(c=st.floats(0.05, 3.0), amp=st.floats(0.0, 0.9), tol=st.floats(1e-14, 1e-6))
def test_bounded_away_from_zero_has_no_critical_points(c, amp, tol):
    g = RadialGrid(-4.0, 4.0, 64)
    p = analytic_profile(g, lambda r: c * (r - amp * np.cos(r)), lambda r: c * (1 + amp * np.sin(r)),
                         lambda r: c * amp * np.cos(r), lambda r: -c * amp * np.sin(r))
    rep = find_critical_points(p, tol)
    assert rep.count == 0


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def test_profile_csv_roundtrip_is_bit_exact(tmp_path):
    g = RadialGrid(0.0, PI, 50, "chebyshev")
    p = _cos_potential(g)
    path = tmp_path / "p.csv"
    write_profile_csv(p, path)
    q = read_profile_csv(path)
    for d in range(4):
        assert np.array_equal(p.nodal(d), q.nodal(d))
    assert np.array_equal(q.grid.r, g.r)
    assert path.read_text().splitlines()[0] == "r,f,f1,f2,f3"


def test_profile_csv_rejects_bad_header(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("x,y\n1,2\n")
    with pytest.raises(InputError):
        read_profile_csv(path)
