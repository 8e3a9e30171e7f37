import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from conekrf.cohomology import SurfaceParams, class_at
from conekrf.profile import (Grid, PositivityViolation, Profile, Regularization, chi,
                             chi_profile, chi_profile_slope, initial_profile, integrate_slope,
                             reference_derivatives, reference_potential, sigma_norm,
                             theta_and_logderivs)

P = SurfaceParams(2, 1, 4, "1/4")


def test_grid():
    g = Grid(15.0, 2049)
    assert g.nodes[g.center] == 0.0
    assert g.nodes[0] == -15.0 and g.nodes[-1] == 15.0
    assert np.allclose(np.diff(g.nodes), g.h, rtol=0, atol=1e-14)
    for bad in [(15.0, 2048), (15.0, 5), (-1.0, 101)]:
        with pytest.raises(ValueError):
            Grid(*bad)
    with pytest.raises(TypeError):
        Grid(15.0, 101.0)


def test_reference_potential_examples():
    v, v1, v2 = reference_potential(P, 0, 0.0)
    assert v == pytest.approx(3 * math.log(2), rel=1e-15)
    assert v1 == 2.5 and v2 == 0.75
    _, v1, _ = reference_potential(P, 0, 60.0)
    assert v1 == pytest.approx(4.0, abs=1e-15)
    _, v1, v2 = reference_potential(P, 0, -40.0)
    assert 0 <= v1 - 1 <= 3 * math.exp(-40) and v2 > 0


def test_reference_no_overflow():
    rho = np.array([-700.0, -300.0, 300.0, 700.0])
    with np.errstate(over="raise", invalid="raise"):
        out = reference_potential(P, 0.5, rho) + reference_derivatives(P, 0.5, rho)
        s = sigma_norm(rho)
        th = theta_and_logderivs(rho, 1e-2)
    assert all(np.all(np.isfinite(x)) for x in out + th)
    assert np.all(np.isfinite(s))


@pytest.mark.parametrize("t", [0.0, 0.7, 1.3])
def test_reference_band_and_mass(t):
    g = Grid(15.0, 2049)
    a_t, b_t = (float(x) for x in class_at(P, t))
    _, v1, v2 = reference_potential(P, t, g.nodes)
    assert np.all((v1 > a_t) & (v1 < b_t))
    mass = integrate.trapezoid(v2, dx=g.h)
    assert abs(mass - (b_t - a_t)) <= 2 * (b_t - a_t) * math.exp(-15) + g.h ** 2 * (b_t - a_t)


def test_reference_derivatives_match_differences():
    rho = np.linspace(-3, 3, 13)
    h = 1e-4
    v1, v2, v3 = reference_derivatives(P, 0.3, rho)
    _, v2p, _ = reference_derivatives(P, 0.3, rho + h)
    _, v2m, _ = reference_derivatives(P, 0.3, rho - h)
    assert np.allclose((v2p - v2m) / (2 * h), v3, atol=1e-8)


def test_sigma_norm():
    assert sigma_norm(0.0) == 0.5
    assert sigma_norm(math.log(3)) == pytest.approx(0.75, rel=1e-15)
    assert sigma_norm(-800.0) == 0.0
    x = np.linspace(-30, 30, 301)
    assert np.all(np.diff(sigma_norm(x)) >= 0)


def test_chi_examples():
    assert chi(1e-4, 1e-2, 0.5) == 0.0
    with pytest.raises(ValueError):
        chi(1e-5, 1e-2, 0.5)
    # eps -> 0: chi(s) -> s^alpha / alpha^2 (the integral gives s^alpha/alpha, times 1/alpha)
    assert chi(1.0, 1e-7, 0.5) == pytest.approx(4.0, rel=1e-5)


def test_chi_against_riemann_oracle(chi_oracle):
    pts = chi_oracle["points"]
    assert len(pts) == 20 and chi_oracle["panels"] == 10 ** 7
    for pt in pts:
        got = chi(pt["s"], pt["epsilon"], pt["alpha"])
        assert got == pytest.approx(pt["chi"], rel=1e-8), pt


def test_chi_golden_value(chi_oracle):
    pt = chi_oracle["points"][0]
    assert (pt["alpha"], pt["epsilon"]) == (0.5, 0.1)
    assert pt["s"] == pytest.approx(1.01)
    assert chi(1.01, 0.1, 0.5) == pytest.approx(2.936241451914929, rel=1e-8)


@settings(max_examples=40, deadline=None)
@given(alpha=st.floats(0.05, 0.95), eps=st.sampled_from([1e-1, 1e-2, 1e-3]))
def test_chi_increasing_concave(alpha, eps):
    s = eps * eps + np.linspace(0, 1, 41)
    c = chi(s, eps, alpha)
    d = np.diff(c)
    assert np.all(d > 0)
    assert np.all(np.diff(d) <= 1e-12 * np.abs(c[-1]))


def test_chi_profile_consistency():
    rho = np.linspace(-15, 15, 61)
    for alpha in (0.25, 0.75):
        prof = chi_profile(rho, 1e-2, alpha)
        direct = chi(sigma_norm(rho) + 1e-4, 1e-2, alpha)
        assert np.allclose(prof, direct, rtol=1e-9, atol=1e-14)


def test_chi_profile_slope_and_integration():
    g = Grid(15.0, 2049)
    c = chi_profile(g.nodes, 1e-2, 0.25)
    s = chi_profile_slope(g.nodes, 1e-2, 0.25)
    assert np.allclose(np.gradient(c, g.h)[2:-2], s[2:-2], atol=1e-4)
    w = integrate_slope(s, g)
    assert w[g.center] == 0.0
    assert np.max(np.abs((w - w[g.center]) - (c - c[g.center]))) < 1e-8


def test_theta_examples():
    th, d1, d2, d3 = theta_and_logderivs(0.0, 0.1)
    assert th == pytest.approx(1.02, rel=1e-14)
    assert d1 == pytest.approx(-0.01 / 1.02, rel=1e-12)
    _, d1, _, _ = theta_and_logderivs(-200.0, 0.1)
    assert d1 == pytest.approx(-1.0, abs=1e-12)
    # second derivative against a centered difference of the first
    h = 1e-5
    _, a, _, _ = theta_and_logderivs(h - 4.0, 0.1)
    _, b, _, _ = theta_and_logderivs(-h - 4.0, 0.1)
    _, _, d2, _ = theta_and_logderivs(-4.0, 0.1)
    assert (a - b) / (2 * h) == pytest.approx(float(d2), rel=1e-7)


@pytest.mark.parametrize("eps", [1e-1, 1e-2, 1e-3])
def test_theta_uniform_bounds(eps):
    rho = np.linspace(-60, 60, 24001)
    _, d1, d2, d3 = theta_and_logderivs(rho, eps)
    assert np.max(np.abs(d1)) <= 1 + 1e-12
    assert np.max(np.abs(d2)) <= 0.25 + 1e-12
    assert np.max(np.abs(d3)) <= 1 / (6 * math.sqrt(3)) + 1e-12


def test_theta_psi_hook_rejected():
    with pytest.raises(NotImplementedError):
        Regularization(1e-2, 1e-2, psi=lambda r: 0 * r)


def test_initial_profile_delta_zero():
    g = Grid(10.0, 401)
    prof = initial_profile(P, Regularization(1e-2, 0.0), g)
    vhat, v1, v2 = reference_potential(P, 0, g.nodes)
    assert np.allclose(prof.v, vhat - vhat[g.center], atol=1e-12)
    assert np.allclose(prof.d1, v1, atol=1e-12)


def test_initial_profile_acceptance_grid():
    g = Grid(15.0, 2049)
    prof = initial_profile(P, Regularization(1e-2, 1e-2), g)
    assert prof.v[g.center] == 0.0
    assert prof.is_positive()
    # golden value from the first build
    assert float(np.min(prof.d2)) == pytest.approx(9.066936e-07, rel=1e-6)


def test_initial_profile_positivity_violation():
    with pytest.raises(PositivityViolation):
        initial_profile(P, Regularization(1e-2, 1.0), Grid(15.0, 2049))


def test_from_slope_pins_center():
    g = Grid(10.0, 401)
    u = 0.01 * np.tanh(g.nodes)
    prof = Profile.from_slope(g, P, 0.2, u)
    assert prof.v[g.center] == 0.0
    assert np.array_equal(prof.slope, u)
