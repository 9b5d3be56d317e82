import math

import numpy as np
import pytest
from scipy import stats

from uplink_meta.dominant import (
    DominantTables,
    conditional_success_approx,
    direct_threshold,
    inverse_strength_cdf,
    mean_nearest_power,
    meta_direct,
    meta_proposed,
    reliability_threshold,
    residual_interference,
    tables_for,
    threshold_context,
)
from uplink_meta.model import SystemParams, inverse_strength, transmit_power
from uplink_meta.moments import moment_b
from uplink_meta.numerics import NumericalError, integrate, random_stream


# --- residual interference ------------------------------------------------------

def test_residual_vanishes_far(params):
    g = [residual_interference(d, params) for d in (1e2, 1e4, 1e6)]
    assert g[2] < 1e-6 * g[0]


def test_residual_saturated_closed_form():
    # with a huge rho every UE transmits at p_max and the inner integral is explicit
    p = SystemParams(power_control=1e6)
    lam = p.bs_density
    for d in (50.0, 300.0, 2000.0):
        single = integrate(lambda z: -math.expm1(-math.pi * lam * z * z) * z ** (1 - p.path_loss),
                           d, np.inf, tol=0.0, rtol=1e-12).value
        exact = p.max_power * 2 * math.pi * lam * single
        assert residual_interference(d, p, nested=True) == pytest.approx(exact, rel=1e-8)
        assert residual_interference(d, p) == pytest.approx(exact, rel=1e-8)


def test_residual_nested_matches_closed_inner(params):
    for d in (40.0, 250.0, 1200.0):
        assert residual_interference(d, params, nested=True) == pytest.approx(
            residual_interference(d, params), rel=1e-7)


def test_residual_decreasing(params):
    d = np.geomspace(5.0, 5e4, 30)
    g = np.array([residual_interference(x, params) for x in d])
    assert np.all(g[:-1] / g[1:] > 1)


def test_residual_requires_positive_distance(params):
    with pytest.raises(ValueError):
        residual_interference(0.0, params)


def test_residual_all_compensations():
    for eps in (0.1, 0.25, 0.55, 1.0):
        p = SystemParams(compensation=eps)
        assert residual_interference(900.0, p) > 0


def test_tables_match_direct(params):
    tab = DominantTables(params)
    r = np.geomspace(tab.r_lo, tab.r_hi, 37)
    exact = np.array([residual_interference(x, params) for x in r])
    assert np.allclose(tab.residual_interference(r), exact, rtol=1e-7)


# --- nearest interferer power ---------------------------------------------------

def test_mean_nearest_power_limits(params):
    sat = SystemParams(power_control=1e6)
    assert mean_nearest_power(1e5, sat) == pytest.approx(sat.max_power, rel=1e-12)
    assert mean_nearest_power(1e-6, params) < 1e-12
    r = np.geomspace(1.0, 1e5, 200)
    m = mean_nearest_power(r, params)
    assert np.all(np.diff(m) >= 0) and np.all((m > 0) & (m <= params.max_power))


def test_mean_nearest_power_sampling(params):
    rng = random_stream(11, 0)
    r = 300.0
    lam = math.pi * params.bs_density
    u = rng.random(200_000)
    x = np.sqrt(-np.log1p(-u * -math.expm1(-lam * r * r)) / lam)
    p = transmit_power(x, params)
    se = p.std() / math.sqrt(p.size)
    assert abs(mean_nearest_power(r, params) - p.mean()) <= 3 * se


# --- conditional success and threshold -------------------------------------------

def test_conditional_success_limits(params):
    assert conditional_success_approx(1e9, 200.0, 0.0, params) == 1.0
    assert conditional_success_approx(1e30, 200.0, 1.0, params) == 0.0
    u = np.geomspace(1e3, 1e12, 50)
    ps = conditional_success_approx(u, 200.0, 1.0, params)
    assert np.all(np.diff(ps) < 0) and np.all((ps >= 0) & (ps <= 1))
    assert conditional_success_approx(1e8, 200.0, 2.0, params) < conditional_success_approx(1e8, 200.0, 1.0, params)


def test_conditional_success_nearest_only(params):
    p = params.replace(noise=0.0)
    ctx = threshold_context(200.0, 1.0, 0.5, p)
    u = 3e7
    full = conditional_success_approx(u, 200.0, 1.0, p)
    # removing the residual term leaves the single-interferer form
    assert full * math.exp(ctx.noise_plus_residual * u) == pytest.approx(1 / (1 + ctx.nearest_term * u), rel=1e-12)


def test_threshold_roundtrip(params):
    for r in (20.0, 150.0, 600.0, 3000.0):
        for th in (0.1, 1.0, 10.0):
            for g in (0.01, 0.3, 0.9, 0.999):
                k = reliability_threshold(r, th, g, params)
                assert conditional_success_approx(k, r, th, params) == pytest.approx(g, abs=1e-10)


def test_threshold_limits(params):
    assert reliability_threshold(200.0, 1.0, 1.0, params) == 0.0
    assert reliability_threshold(200.0, 1.0, 0.0, params) == math.inf
    k = [reliability_threshold(200.0, 1.0, g, params) for g in (1e-3, 1e-30, 1e-300)]
    assert k[0] < k[1] < k[2]
    gs = np.linspace(0.01, 0.99, 99)
    ks = [reliability_threshold(200.0, 1.0, g, params) for g in gs]
    assert np.all(np.diff(ks) < 0)


def test_threshold_without_noise_or_residual(params):
    from uplink_meta.dominant import _threshold_from_terms

    kappa, g = 2e-8, 0.4
    assert float(_threshold_from_terms(kappa, 0.0, g)) == pytest.approx((1 / g - 1) / kappa, rel=1e-15)
    # tiny gamma forces the log-domain Lambert path; the root must still hold
    s, g = 3e-9, 1e-250
    k = float(_threshold_from_terms(kappa, s, g))
    assert -s * k - math.log1p(kappa * k) == pytest.approx(math.log(g), rel=1e-12)


def test_threshold_matches_root_finding(params):
    for r in (30.0, 400.0, 2500.0):
        for g in (0.05, 0.5, 0.95):
            k = reliability_threshold(r, 1.0, g, params)
            assert direct_threshold(r, 1.0, g, params) == pytest.approx(k, rel=1e-8)


# --- inverse strength cdf ---------------------------------------------------------

def test_inverse_strength_cdf_zero(params):
    assert inverse_strength_cdf(0.0, params) == 0.0
    assert inverse_strength_cdf(np.inf, params) == 1.0


@pytest.mark.parametrize("eps,rho,pmax", [(0.4, 8e-6, 0.2), (0.7, 1e-5, 0.1), (0.25, 3e-6, 0.5)])
def test_inverse_strength_cdf_branches(eps, rho, pmax):
    p = SystemParams(compensation=eps, power_control=rho, max_power=pmax)
    uc = (pmax / rho) ** (1 / eps) / pmax
    rc = p.crossover_radius
    a = p.path_loss
    lo = -math.expm1(-math.pi * p.bs_density * ((uc * rho) ** (1 / (a * (1 - eps)))) ** 2)
    hi = -math.expm1(-math.pi * p.bs_density * ((uc * pmax) ** (1 / a)) ** 2)
    target = -math.expm1(-math.pi * p.bs_density * rc * rc)
    assert lo == pytest.approx(target, rel=1e-12)
    assert hi == pytest.approx(target, rel=1e-12)
    assert inverse_strength(rc, p) == pytest.approx(uc, rel=1e-12)
    x = np.geomspace(uc * 1e-6, uc * 1e6, 2001)
    f = inverse_strength_cdf(x, p)
    assert np.all(np.diff(f) >= 0)


def test_inverse_strength_cdf_sampling(params):
    rng = random_stream(12, 0)
    r = np.sqrt(rng.exponential(size=1_000_000) / (math.pi * params.bs_density))
    u = inverse_strength(r, params)
    ks = stats.kstest(u, lambda x: inverse_strength_cdf(x, params)).statistic
    assert ks < 0.01


def test_inverse_strength_cdf_full_inversion():
    p = SystemParams(compensation=1.0)
    uc = 1 / p.power_control
    assert inverse_strength_cdf(0.5 * uc, p) == 0.0
    assert inverse_strength_cdf(uc * (1 + 1e-12), p) == pytest.approx(-math.expm1(-math.pi * p.bs_density * p.crossover_radius**2))


# --- meta distribution -------------------------------------------------------------

def test_meta_limits(params):
    assert meta_proposed(1.0, 0.0, params) == 1.0
    assert meta_proposed(1.0, 1.0, params) == 0.0
    # the noise factor alone caps the threshold at log(1/gamma) / (theta noise),
    # so the limit is approached only logarithmically in gamma
    assert meta_proposed(1.0, 1e-300, params) > 0.999
    assert meta_proposed(1.0, 0.999999, params) < 1e-3
    assert meta_direct(1.0, 0.999999, params) < 1e-3
    assert meta_direct(1e-6, 0.5, params) > 0.999
    assert meta_proposed(1e-6, 0.5, params) > 0.999


def test_meta_monotone_in_gamma(params):
    g = np.linspace(0.01, 0.99, 99)
    tab = tables_for(params)
    v = np.array([meta_proposed(1.0, x, params, tab) for x in g])
    assert np.all(np.diff(v) <= 0)
    assert np.all((v >= 0) & (v <= 1))


def test_meta_monotone_in_theta(params):
    th = 10 ** (np.linspace(-15, 15, 31) / 10)
    v = np.array([meta_proposed(t, 0.5, params) for t in th])
    assert np.all(np.diff(v) <= 0)


def test_meta_direct_agrees(params):
    for th in (0.1, 1.0, 10.0):
        for g in (0.2, 0.8):
            assert abs(meta_proposed(th, g, params) - meta_direct(th, g, params)) <= 1e-6


def test_meta_mean_matches_first_moment(params):
    # the mean of a CCDF over [0, 1] is the mean of the underlying variable
    th = 1.0
    g = (np.arange(200) + 0.5) / 200
    tab = tables_for(params)
    area = np.mean([meta_proposed(th, x, params, tab) for x in g])
    assert abs(area - moment_b(th, 1, params).real) <= 0.02


def test_meta_bad_arguments(params):
    with pytest.raises(ValueError):
        meta_proposed(0.0, 0.5, params)
    with pytest.raises(ValueError):
        meta_proposed(1.0, 1.5, params)


def test_meta_reports_nonconvergence(params, monkeypatch):
    from uplink_meta import dominant
    from uplink_meta.numerics import QuadratureResult

    monkeypatch.setattr(dominant, "integrate", lambda *a, **k: QuadratureResult(0.5, 1.0, 10, False))
    with pytest.raises(NumericalError):
        dominant.meta_proposed(1.0, 0.5, params)
