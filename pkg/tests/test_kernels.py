import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from volblocks import kernels as K

FAMILIES = [K.tukey_hanning(2), K.tukey_hanning(16), K.parzen(), K.cubic(),
            K.tukey_hanning(5)]


def test_from_name_roundtrip():
    assert K.from_name("th2") == K.tukey_hanning(2)
    assert K.from_name("th16") == K.tukey_hanning(16)
    assert K.from_name("parzen") == K.parzen()
    assert K.from_name("cubic") == K.cubic()
    assert K.from_name("th7") == K.tukey_hanning(7)
    with pytest.raises(ValueError):
        K.from_name("bartlett")
    with pytest.raises(ValueError):
        K.from_name("thx")


@pytest.mark.parametrize("fam", FAMILIES)
def test_boundary_conditions(fam):
    assert K.eval_kernel(fam, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert K.eval_kernel(fam, 1.0) == pytest.approx(0.0, abs=1e-14)


def test_cubic_midpoint():
    # 1 - 3(0.5)^2 + 2(0.5)^3 = 0.5
    assert K.eval_kernel(K.cubic(), 0.5) == pytest.approx(0.5, abs=1e-15)


def test_domain_error():
    with pytest.raises(ValueError):
        K.eval_kernel(K.parzen(), -0.1)
    with pytest.raises(ValueError):
        K.eval_kernel(K.parzen(), 1.1)


@pytest.mark.parametrize("fam", FAMILIES)
def test_derivatives_match_finite_differences(fam):
    h = 1e-6
    for x in (0.1, 0.3, 0.45, 0.6, 0.9):
        fd1 = (K.eval_kernel(fam, x + h) - K.eval_kernel(fam, x - h)) / (2 * h)
        assert K.kernel_d1(fam, x) == pytest.approx(fd1, rel=1e-5, abs=1e-6)
        fd2 = (K.kernel_d1(fam, x + h) - K.kernel_d1(fam, x - h)) / (2 * h)
        assert K.kernel_d2(fam, x) == pytest.approx(fd2, rel=1e-4, abs=1e-4)


@pytest.mark.parametrize("fam", [K.tukey_hanning(2), K.tukey_hanning(16),
                                 K.parzen()])
def test_smooth_kernel_condition(fam):
    # k'(0) = k'(1) = 0 for the smooth families; small h keeps the
    # curvature term (|k''(0)| ~ 1.3e3 for th16) out of the difference
    h = 1e-8
    d0 = (K.eval_kernel(fam, h) - K.eval_kernel(fam, 0.0)) / h
    d1 = (K.eval_kernel(fam, 1.0) - K.eval_kernel(fam, 1.0 - h)) / h
    assert abs(d0) < 1e-4
    assert abs(d1) < 1e-4


@pytest.mark.parametrize("fam", FAMILIES)
def test_profile_identity(fam):
    p = K.profile(fam)
    assert p.d == pytest.approx(p.k00 * p.k22 / p.k11**2, rel=1e-12)
    assert min(p.k00, p.k11, p.k22, p.d) > 0


def test_profile_constants_against_published_values():
    # standard realized-kernel moment constants
    th2 = K.profile(K.tukey_hanning(2))
    assert th2.k00 == pytest.approx(0.2185, abs=5e-4)
    assert th2.k11 == pytest.approx(1.7124, abs=5e-4)
    assert th2.k22 == pytest.approx(41.76, abs=0.05)
    th16 = K.profile(K.tukey_hanning(16))
    assert th16.k00 == pytest.approx(0.0317, abs=2e-4)
    assert th16.k11 == pytest.approx(10.26, abs=0.01)
    assert th16.k22 == pytest.approx(14374.0, abs=1.0)
    pz = K.profile(K.parzen())
    assert pz.k00 == pytest.approx(151.0 / 560.0, rel=1e-9)
    assert pz.k11 == pytest.approx(1.5, rel=1e-9)
    assert pz.k22 == pytest.approx(24.0, rel=1e-9)
    cu = K.profile(K.cubic())
    assert cu.k00 == pytest.approx(13.0 / 35.0, rel=1e-9)
    assert cu.k11 == pytest.approx(1.2, rel=1e-9)
    assert cu.k22 == pytest.approx(12.0, rel=1e-9)


def test_parametric_losses():
    # g(1)/8 - 1 round trips; exact values pinned by independent
    # 30-digit quadrature
    assert K.parametric_loss(K.profile(K.tukey_hanning(2))) == pytest.approx(
        0.0358945, abs=5e-5)
    assert K.parametric_loss(K.profile(K.parzen())) == pytest.approx(
        0.068128, abs=5e-5)
    assert K.parametric_loss(K.profile(K.cubic())) == pytest.approx(
        0.129909, abs=5e-5)
    assert K.parametric_loss(K.profile(K.tukey_hanning(16))) == pytest.approx(
        0.0031095, abs=5e-6)


def test_g_at_one_th16():
    assert K.g(1.0, K.profile(K.tukey_hanning(16))) == pytest.approx(
        8.02, abs=0.01)


@pytest.mark.parametrize("fam", FAMILIES)
def test_g_strictly_increasing(fam):
    p = K.profile(fam)
    grid = np.linspace(0.01, 1.0, 100)
    vals = [K.g(r, p) for r in grid]
    assert all(b > a for a, b in zip(vals, vals[1:]))


def test_g_domain_errors():
    p = K.profile(K.parzen())
    with pytest.raises(ValueError):
        K.g(0.0, p)
    with pytest.raises(ValueError):
        K.g(-0.5, p)
    with pytest.raises(ValueError):
        K.c_star(0.0, p)


def _bracket(c, rho, xi, p):
    return c * p.k00 + 2.0 * p.k11 * rho * xi**2 / c + p.k22 * xi**4 / c**3


def test_c_star_is_the_bracket_minimizer():
    p = K.profile(K.tukey_hanning(2))
    rho, xi = 0.77, 1.0
    res = minimize_scalar(lambda c: _bracket(c, rho, xi, p),
                          bounds=(1e-3, 1e3), method="bounded",
                          options={"xatol": 1e-10})
    assert res.x == pytest.approx(K.c_star(rho, p) * xi, rel=1e-4)


@pytest.mark.parametrize("fam", [K.tukey_hanning(2), K.tukey_hanning(16),
                                 K.parzen(), K.cubic()])
def test_avar_at_optimum_identity(fam):
    # 4 * bracket(c* xi) == xi * g(rho) for the normalized variance bracket
    p = K.profile(fam)
    for rho in (0.3, 0.4, 0.5, 0.62, 0.77, 0.857, 0.9, 1.0):
        for xi in (0.01, 0.1, 1.0):
            c = K.c_star(rho, p) * xi
            lhs = 4.0 * _bracket(c, rho, xi, p)
            assert lhs == pytest.approx(xi * K.g(rho, p), rel=1e-10)


def test_c_star_monotone_in_rho():
    for fam in (K.tukey_hanning(2), K.parzen(), K.cubic()):
        p = K.profile(fam)
        assert K.c_star(0.6, p) < K.c_star(0.9, p)


@settings(max_examples=60, deadline=None)
@given(rho=st.floats(0.05, 1.5), fam=st.sampled_from(
    [K.tukey_hanning(2), K.parzen(), K.cubic()]))
def test_bracket_minimized_at_c_star(rho, fam):
    p = K.profile(fam)
    c = K.c_star(rho, p)
    v = _bracket(c, rho, 1.0, p)
    assert v <= _bracket(c * 1.01, rho, 1.0, p) + 1e-12
    assert v <= _bracket(c * 0.99, rho, 1.0, p) + 1e-12
    assert K.g(rho, p) > 0
