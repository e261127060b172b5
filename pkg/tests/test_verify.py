import math

import numpy as np
import pytest
from conftest import PI, metric_from, sphere_pair
from hypothesis import given, settings
from hypothesis import strategies as st

from solitonlab import families
from solitonlab import geometry as geo
from solitonlab.errors import InputError
from solitonlab.geometry import FiberDescriptor
from solitonlab.profile import RadialGrid, analytic_profile, normalize_at_regular_point, sampled_profile
from solitonlab.verify import (
    Case,
    Conformal,
    GeneralizedSigmaK,
    KYamabe,
    Yamabe,
    check_identity_eq2,
    check_kazdan_warner_pointwise,
    classify,
    conformal_residual,
    default_tolerance,
    soliton_residual,
)


def _line(grid):
    return analytic_profile(grid, lambda r: r, lambda r: 1.0, lambda r: 0.0, lambda r: 0.0)


def _half_square(grid):
    return analytic_profile(grid, lambda r: r**2 / 2, lambda r: r, lambda r: 1.0, lambda r: 0.0)


def _cos(grid, shift=0.0):
    return analytic_profile(grid, lambda r: np.cos(r) + shift * r, lambda r: -np.sin(r) + shift,
                            lambda r: -np.cos(r), np.sin)


def product_pair(grid=None):
    grid = grid or RadialGrid(-5.0, 5.0, 128)
    m = metric_from("linear", 3, grid, {"a": 1.0, "b": 0.0}, FiberDescriptor.flat(2))
    return m, _line(grid)


def flat_pair(n=3, grid=None):
    grid = grid or RadialGrid(0.0, 5.0, 128)
    return metric_from("linear", n, grid), _half_square(grid)


# ---------------------------------------------------------------------------
# residuals
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [3, 4, 5])
def test_sphere_is_conformal(n):
    m, f = sphere_pair(n)
    rep = conformal_residual(m, f)
    assert rep.passed and rep.sup < 1e-12
    assert rep.tol == 1e-8
    assert rep.l2_radial >= 0 and rep.l2_tangential >= 0


def test_product_is_conformal_with_zero_channels():
    m, f = product_pair()
    rep = conformal_residual(m, f)
    assert rep.sup == 0.0


def test_sphere_with_linear_potential_fails():
    n = 3
    g = RadialGrid(0.0, PI, 256)
    m = metric_from("sin", n, g)
    rep = conformal_residual(m, _line(g))
    assert not rep.passed
    # at r = pi/4: f'' = 0, tangential = cot r, Laplacian / n = (n-1) cot r / n
    i = np.argmin(np.abs(rep.r - PI / 4))
    r = rep.r[i]
    assert rep.tangential[i] == pytest.approx(abs(1 / math.tan(r)) / n, rel=1e-12)
    assert rep.radial[i] == pytest.approx((n - 1) / n / math.tan(r), rel=1e-12)


def test_yamabe_examples():
    for n in (3, 4, 6):
        m, f = flat_pair(n)
        assert soliton_residual(m, f, Yamabe(-1.0)).sup < 1e-14
    g = RadialGrid(-3.0, 3.0, 64)
    m = metric_from("linear", 3, g, {"a": 1.0, "b": 0.0}, FiberDescriptor.flat(2))
    rep = soliton_residual(m, _half_square(g), Yamabe(-1.0))
    assert rep.sup_radial == 0.0 and np.all(rep.tangential == 1.0) and not rep.passed


def test_explicit_conformal_phi_on_sphere():
    m, f = sphere_pair(3, 512)
    phi = _cos(m.grid)
    assert soliton_residual(m, f, Conformal(phi)).sup < 1e-13


def test_k_yamabe_and_generalized_targets():
    m, f = flat_pair(4)
    # sigma_k = 0 on flat space, so phi = -2(n-1) lam must equal f'' = 1
    assert soliton_residual(m, f, KYamabe(2, -1.0 / 6.0)).sup < 1e-14
    assert soliton_residual(m, f, GeneralizedSigmaK(lambda s: np.exp(s), 2)).sup < 1e-14
    with pytest.raises(InputError):
        KYamabe(0, 1.0)
    with pytest.raises(InputError):
        GeneralizedSigmaK(np.exp, 2, monotone=False)
    with pytest.raises(InputError):
        soliton_residual(m, f, KYamabe(5, 0.0))


def test_shared_grid_precondition():
    m, _ = sphere_pair(3, 64)
    with pytest.raises(InputError):
        conformal_residual(m, _cos(RadialGrid(0.0, 3.0, 64)))


def test_fd_tolerance_scales_with_grid():
    g = RadialGrid(0.0, PI, 201)
    m = metric_from("sin", 3, g)
    f = sampled_profile(g, -np.cos(g.r), order=4)
    assert default_tolerance(m, f) == pytest.approx(10 * g.h**4)
    assert conformal_residual(m, f).passed


def test_residual_csv(tmp_path):
    m, f = sphere_pair(3, 64)
    rep = conformal_residual(m, f)
    path = tmp_path / "res.csv"
    rep.write_csv(path)
    lines = path.read_text().splitlines()
    assert lines[0] == "r,radial,tangential" and len(lines) == 63


# ---------------------------------------------------------------------------
# identity (eq2) and its Kazdan-Warner contraction
# ---------------------------------------------------------------------------

@pytest.mark.parametrize("n", [3, 4, 5])
def test_identity_on_sphere_and_perturbation(n):
    m, f = sphere_pair(n)
    phi = analytic_profile(m.grid, np.cos, lambda r: -np.sin(r), lambda r: -np.cos(r), np.sin)
    assert check_identity_eq2(m, f, phi) < 1e-12
    bad = analytic_profile(m.grid, lambda r: np.cos(r) + 0.1 * r, lambda r: -np.sin(r) + 0.1,
                           lambda r: -np.cos(r), np.sin)
    assert check_identity_eq2(m, f, bad) >= 0.1 * (n - 1) * (1 - 1e-3)


def test_identity_on_product():
    m, f = product_pair()
    zero = analytic_profile(m.grid, lambda r: 0.0, lambda r: 0.0, lambda r: 0.0, lambda r: 0.0)
    assert check_identity_eq2(m, f, zero) == 0.0


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 6), a=st.floats(0.2, 5.0), b=st.floats(-3, 3))
def test_conformal_pairs_satisfy_identity(n, a, b):
    m, f = sphere_pair(n, 256)
    g = f.scaled(a, b)
    assert conformal_residual(m, g, 1e-10).passed
    phi = analytic_profile(m.grid, lambda r: a * np.cos(r), lambda r: -a * np.sin(r),
                           lambda r: -a * np.cos(r), lambda r: a * np.sin(r))
    assert check_identity_eq2(m, g, phi) < 1e-8


def test_kazdan_warner_pointwise():
    n = 4
    m, f = sphere_pair(n, 512)
    # sigma_k constant on the sphere, so the defect is Ric_rr f'^2 = (n-1) sin^2
    for k in (1, 2):
        assert check_kazdan_warner_pointwise(m, f, k) == pytest.approx(n - 1, rel=1e-4)
    m, f = flat_pair(3)
    assert check_kazdan_warner_pointwise(m, f, 1) == 0.0


# ---------------------------------------------------------------------------
# classification
# ---------------------------------------------------------------------------

def test_classification_table():
    m, f = product_pair()
    res = classify(m, f)
    assert res.case is Case.CASE1_PRIME
    assert abs(res.min_ricci) <= 1e-8 and any("zero eigenvalue" in s for s in res.notes)

    g = RadialGrid(-3.0, 3.0, 256)
    m = metric_from("cosh", 3, g)
    res = classify(m, families.potential_profile("cosh", g))
    assert res.case is Case.CASE1 and not res.ricci_nonnegative

    m, _ = flat_pair(3)
    res = classify(m, families.potential_profile("linear", m.grid))
    assert res.case is Case.CASE2_PRIME

    m, f = sphere_pair(3)
    res = classify(m, f)
    assert res.case is Case.CASE3 and res.critical_count == 2


def test_hyperbolic_space_is_case2_unprimed():
    g = RadialGrid(0.0, 2.0, 256)
    m = metric_from("sinh", 3, g)
    res = classify(m, families.potential_profile("sinh", g))
    assert res.case is Case.CASE2


def test_non_soliton_is_invalid():
    g = RadialGrid(0.0, PI, 256)
    res = classify(metric_from("sin", 3, g), _line(g))
    assert res.case is Case.INVALID


def test_classification_stable_under_refinement_and_normalization():
    for name, lo, hi in (("sin", 0.0, PI), ("cosh", -2.0, 2.0), ("linear", 0.0, 4.0)):
        cases = set()
        for nodes in (128, 256):
            g = RadialGrid(lo, hi, nodes)
            m = metric_from(name, 3, g)
            f = families.potential_profile(name, g)
            cases.add(classify(m, f).case)
            cases.add(classify(m, normalize_at_regular_point(f.scaled(3.0, 1.0), 0.5 * (lo + hi) + 0.3)).case)
        assert len(cases) == 1, (name, cases)


@settings(max_examples=30, deadline=None)
@given(a=st.sampled_from([0.5, 2.0, 10.0]) | st.floats(0.1, 20.0), b=st.floats(-10, 10))
def test_scale_invariance(a, b):
    g = RadialGrid(0.0, PI, 256)
    m = metric_from("sin", 4, g)
    f = _line(g)  # non-soliton so the channels are nonzero
    base = conformal_residual(m, f)
    scaled = conformal_residual(m, f.scaled(a, b))
    np.testing.assert_allclose(scaled.radial, a * base.radial, rtol=1e-12, atol=0)
    np.testing.assert_allclose(scaled.tangential, a * base.tangential, rtol=1e-12, atol=0)


def test_solved_ricci_sign_matches_geometry():
    m, f = sphere_pair(3, 128)
    res = classify(m, f)
    assert res.min_ricci == pytest.approx(geo.curvature_sweep(m).min_ricci)
