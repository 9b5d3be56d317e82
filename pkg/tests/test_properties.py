import math

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from uplink_meta.config import ConfigError, parse_config
from uplink_meta.dominant import conditional_success_approx, inverse_strength_cdf, reliability_threshold
from uplink_meta.model import SystemParams, interferer_intensity, received_strength, transmit_power
from uplink_meta.moments import link_kernel
from uplink_meta.numerics import lambert_w0, regularized_incomplete_beta

params_st = st.builds(
    SystemParams,
    bs_density=st.floats(1e-6, 1e-3),
    path_loss=st.floats(2.5, 5.0),
    compensation=st.floats(0.05, 1.0),
    power_control=st.floats(1e-7, 1e-3),
    max_power=st.floats(0.01, 2.0),
    noise=st.floats(0.0, 1e-8),
)


@given(st.floats(-math.exp(-1) + 1e-15, 1e300))
def test_lambert_identity(x):
    w = lambert_w0(x)
    assert abs(w * math.exp(w) - x) <= 1e-12 * max(1.0, abs(x))


@given(st.floats(0, 1), st.floats(0.05, 50), st.floats(0.05, 50))
def test_betainc_symmetry(x, a, b):
    x = 1.0 - (1.0 - x)    # x and 1 - x both exact, so the identity is tested, not rounding
    assert abs(regularized_incomplete_beta(x, a, b) - (1 - regularized_incomplete_beta(1 - x, b, a))) <= 1e-12


@given(params_st, st.floats(0.0, 1e5), st.floats(0.0, 1e5))
def test_power_monotone(p, r1, r2):
    lo, hi = sorted((r1, r2))
    assert transmit_power(lo, p) <= transmit_power(hi, p) <= p.max_power
    assert interferer_intensity(hi, p) <= p.bs_density


@given(params_st, st.floats(1.0, 1e5), st.floats(1.0, 1e5))
def test_received_strength_decreasing(p, r1, r2):
    lo, hi = sorted((r1, r2))
    if p.compensation < 1 and hi > lo * (1 + 1e-9):
        assert received_strength(lo, p) > received_strength(hi, p)


@settings(max_examples=60, deadline=None)
@given(params_st, st.floats(5.0, 5e3), st.floats(1e-3, 1e3), st.floats(1e-6, 1 - 1e-6))
def test_threshold_inverts_success(p, r, theta, gamma):
    k = reliability_threshold(r, theta, gamma, p)
    assert k >= 0
    assert abs(conditional_success_approx(k, r, theta, p) - gamma) <= 1e-10


@given(params_st, st.lists(st.floats(0, 1e30), min_size=2, max_size=20))
def test_inverse_strength_cdf_valid(p, xs):
    x = np.sort(np.asarray(xs))
    f = inverse_strength_cdf(x, p)
    assert np.all((f >= 0) & (f <= 1)) and np.all(np.diff(f) >= 0)


@settings(deadline=None)
@given(st.lists(st.floats(0, 1e6), min_size=2, max_size=10), st.floats(0.1, 5.0))
def test_link_kernel_monotone(qs, b):
    q = np.sort(np.asarray(qs))
    f = link_kernel(q, b, 4.0)
    assert np.all(np.abs(f.imag) <= 1e-12 * np.maximum(1, np.abs(f.real)))
    assert np.all(np.diff(f.real) >= -1e-12 * np.abs(f.real[1:]))


@given(st.lists(st.floats(allow_nan=False, allow_infinity=False), min_size=1, max_size=5))
def test_gamma_grid_validation(gs):
    ok = all(0 < g < 1 for g in gs)
    try:
        cfg = parse_config({"gamma": gs})
        assert ok and cfg.gamma == tuple(gs)
    except ConfigError as exc:
        assert not ok and exc.path.startswith("gamma")
