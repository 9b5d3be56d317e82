"""Dominant-interferer approximation of the uplink SINR meta distribution.

The nearest interfering UE is kept exactly (Rayleigh fading) and the rest of
the interference is replaced by its conditional mean given the nearest
interferer distance. The meta distribution then reduces to a single integral
over that distance, with the reliability threshold obtained in closed form
through the principal Lambert W branch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .model import (
    SystemParams,
    interferer_power,
    nearest_interferer_pdf,
    serving_cdf,
)
from .numerics import (
    INNER_TOL,
    MIDDLE_TOL,
    NumericalError,
    find_root_monotone,
    gauss_legendre_panels,
    integrate,
    lambert_w0,
    lambert_w0_exp,
)

# Above this log-argument the Lambert W argument is never formed explicitly.
_LOG_DOMAIN_CUTOFF = 700.0


def interferer_power_mass(z, params: SystemParams):
    """``int_0^z p_t'(x) 2 pi lambda x exp(-pi lambda x^2) dx``.

    Mean transmit power of an interferer times the probability that its link
    is shorter than ``z``; closed form through the regularized lower
    incomplete gamma function.
    """
    z = np.asarray(z, dtype=float)
    lam = params.bs_density
    k = 0.5 * params.path_loss * params.compensation
    rc = params.crossover_radius
    scale = params.power_control * (math.pi * lam) ** (-k) * math.gamma(1 + k)
    zc = np.minimum(z, rc)
    below = scale * special.gammainc(1 + k, math.pi * lam * zc * zc)
    above = params.max_power * (np.exp(-math.pi * lam * zc * zc) - np.exp(-math.pi * lam * z * z))
    out = below + above
    return float(out) if out.ndim == 0 else out


def _power_mass_quad(z: float, params: SystemParams) -> float:
    lam = params.bs_density

    def integrand(x):
        return interferer_power(x, params) * 2 * math.pi * lam * x * math.exp(-math.pi * lam * x * x)

    rc = params.crossover_radius
    return integrate(integrand, 0.0, z, tol=INNER_TOL * params.max_power, points=[rc]).value


def residual_interference(d1: float, params: SystemParams, nested: bool = False) -> float:
    """Mean interference from all interferers beyond the nearest one at ``d1``.

    ``nested=True`` evaluates the inner link-length integral by quadrature as
    well; otherwise it uses :func:`interferer_power_mass`.
    """
    if params.path_loss <= 2:
        raise NumericalError("interference integral diverges for path_loss <= 2")
    if d1 <= 0:
        raise ValueError("d1 must be > 0")
    lam, a = params.bs_density, params.path_loss
    if nested:
        inner = lambda z: _power_mass_quad(z, params)  # noqa: E731
    else:
        inner = lambda z: interferer_power_mass(z, params)  # noqa: E731

    def integrand(z):
        return 2 * math.pi * lam * inner(z) * z ** (1.0 - a)

    # integrated in log z (the integrand decays like z^(2 - alpha) there, and the
    # crossover may lie many decades out), split at the crossover kink
    def logged(v):
        z = math.exp(v)
        return integrand(z) * z

    lo = math.log(d1)
    hi = max(lo, math.log(params.mean_cell_radius)) + 80.0 / (a - 2.0)
    rc = params.crossover_radius
    pts = [math.log(rc)] if d1 < rc < math.exp(hi) else None
    out = integrate(logged, lo, hi, tol=0.0, rtol=MIDDLE_TOL, limit=400, points=pts)
    res, ok = out.value, out.converged
    if not ok:
        raise NumericalError(f"residual interference did not converge at d1={d1}")
    return float(res)


def mean_nearest_power(r, params: SystemParams):
    """Mean transmit power of an interferer at distance ``r`` from the typical BS."""
    r = np.asarray(r, dtype=float)
    lam = params.bs_density
    norm = -np.expm1(-math.pi * lam * r * r)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(r > 0, interferer_power_mass(r, params) / norm, 0.0)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ThresholdContext:
    nearest_distance: float
    sir_threshold: float
    reliability: float
    noise_plus_residual: float
    nearest_term: float


class DominantTables:
    """Immutable lookup of the residual interference on a log-spaced distance grid.

    The table spans the range that carries all but ``1e-12`` of the nearest
    interferer distance law; outside it the function is clamped to the end
    values (its tails are flat at small distances and negligible at large ones).
    """

    def __init__(self, params: SystemParams, n: int = 400):
        self.params = params
        lam = params.bs_density
        self.r_lo = math.sqrt(1.4e-6 / (math.pi * lam))
        self.r_hi = math.sqrt(30.0 / (math.pi * lam))
        grid = np.geomspace(self.r_lo, self.r_hi, n)
        rc = params.crossover_radius
        if self.r_lo < rc < self.r_hi:
            grid = np.unique(np.append(grid, rc))
        self.grid = grid
        # cumulative Gauss-Legendre sums between nodes, anchored by one quadrature at the top
        nodes, weights = gauss_legendre_panels(np.log(grid), order=16)
        z = np.exp(nodes)
        lam, a = params.bs_density, params.path_loss
        f = 2 * math.pi * lam * interferer_power_mass(z, params) * z ** (2.0 - a)
        pieces = np.sum(f * weights, axis=1)
        top = residual_interference(grid[-1], params)
        self.residual = top + np.concatenate([np.cumsum(pieces[::-1])[::-1], [0.0]])
        self._spline = CubicSpline(np.log(grid), np.log(self.residual))

    def residual_interference(self, r):
        lr = np.log(np.clip(r, self.r_lo, self.r_hi))
        out = np.exp(self._spline(lr))
        return float(out) if np.ndim(out) == 0 else out


@lru_cache(maxsize=64)
def tables_for(params: SystemParams) -> DominantTables:
    return DominantTables(params)


def _threshold_terms(r, theta, params: SystemParams, tables: DominantTables | None):
    tables = tables or tables_for(params)
    g = tables.residual_interference(r)
    kappa = theta * mean_nearest_power(r, params) * np.asarray(r, dtype=float) ** (-params.path_loss)
    s = theta * (params.noise + g)
    return kappa, s


def threshold_context(r: float, theta: float, gamma: float, params: SystemParams,
                      tables: DominantTables | None = None) -> ThresholdContext:
    kappa, s = _threshold_terms(r, theta, params, tables)
    return ThresholdContext(float(r), float(theta), float(gamma), float(s), float(kappa))


def conditional_success_approx(u, d1, theta, params: SystemParams, tables: DominantTables | None = None):
    """Approximate conditional success probability of a link with
    ``u = r^alpha / p_t(r)`` when the nearest interferer sits at ``d1``.
    """
    u = np.asarray(u, dtype=float)
    if theta == 0:
        return 1.0 if u.ndim == 0 else np.ones_like(u)
    kappa, s = _threshold_terms(d1, theta, params, tables)
    out = np.exp(-s * u) / (1.0 + kappa * u)
    return float(out) if np.ndim(out) == 0 else out


def _threshold_from_terms(kappa, s, gamma):
    kappa = np.asarray(kappa, dtype=float)
    s = np.asarray(s, dtype=float)
    kappa, s = np.broadcast_arrays(kappa, s)
    out = np.empty(kappa.shape)
    if gamma <= 0:
        out[...] = np.inf
        return out
    if gamma >= 1:
        out[...] = 0.0
        return out
    no_s = s <= 0
    out[no_s] = (1.0 / gamma - 1.0) / kappa[no_s]
    ks, ss = kappa[~no_s], s[~no_s]
    y0 = ss / ks
    log_arg = np.log(y0) + y0 - math.log(gamma)
    w = np.empty_like(y0)
    direct = log_arg < _LOG_DOMAIN_CUTOFF
    w[direct] = lambert_w0(np.exp(log_arg[direct]))
    w[~direct] = lambert_w0_exp(log_arg[~direct])
    k = np.maximum(-1.0 / ks + w / ss, 0.0)
    # -1/kappa + W/S cancels when K is small; two Newton steps on
    # S u + log(1 + kappa u) = -log(gamma) restore full relative accuracy
    for _ in range(2):
        g = ss * k + np.log1p(ks * k) + math.log(gamma)
        k = np.maximum(k - g / (ss + ks / (1.0 + ks * k)), 0.0)
    out[~no_s] = k
    return out


def reliability_threshold(r, theta: float, gamma: float, params: SystemParams,
                          tables: DominantTables | None = None):
    """Largest ``u`` whose approximate conditional success probability reaches ``gamma``.

    ``K = -1/kappa + W0(S exp(S/kappa) / (gamma kappa)) / S``; the Lambert
    argument is handled in the log domain when it would overflow.
    """
    if theta <= 0:
        raise ValueError("theta must be > 0")
    kappa, s = _threshold_terms(r, theta, params, tables)
    out = _threshold_from_terms(kappa, s, gamma)
    return float(out) if np.ndim(r) == 0 else out


def inverse_strength_cdf(x, params: SystemParams):
    """CDF of ``U = R_u^alpha / p_t(R_u)`` with ``R_u`` Rayleigh distributed.

    Two branches meet at ``u_c = (p_max / rho)^(1/eps) / p_max``, the value of
    ``U`` at the power-control crossover radius.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be >= 0")
    a, e = params.path_loss, params.compensation
    rho, pmax = params.power_control, params.max_power
    uc = (pmax / rho) ** (1.0 / e) / pmax
    hi = serving_cdf((np.maximum(x, uc) * pmax) ** (1.0 / a), params)
    if e < 1:
        lo = serving_cdf((np.minimum(x, uc) * rho) ** (1.0 / (a * (1.0 - e))), params)
    else:
        # full inversion: U is the constant 1/rho below the crossover
        lo = np.zeros_like(x)
    out = np.where(x < uc, lo, hi)
    out = np.where(np.isposinf(x), 1.0, out)
    return float(out) if out.ndim == 0 else out


def _outer_limits(params: SystemParams, tables: DominantTables):
    pts = [params.crossover_radius, params.mean_cell_radius]
    return tables.r_lo, tables.r_hi, pts


def _check_args(theta, gamma):
    if not theta > 0:
        raise ValueError("theta must be > 0")
    if not 0 <= gamma <= 1:
        raise ValueError("gamma must lie in [0, 1]")


def meta_proposed(theta: float, gamma: float, params: SystemParams,
                  tables: DominantTables | None = None, tol: float = 1e-10) -> float:
    """Dominant-interferer approximation of ``P(P_s(theta) > gamma)``."""
    _check_args(theta, gamma)
    if gamma <= 0:
        return 1.0
    if gamma >= 1:
        return 0.0
    tables = tables or tables_for(params)
    lo, hi, pts = _outer_limits(params, tables)

    def integrand(r):
        k = reliability_threshold(r, theta, gamma, params, tables)
        return inverse_strength_cdf(k, params) * nearest_interferer_pdf(r, params)

    res = integrate(integrand, lo, hi, tol=tol, rtol=1e-10, points=pts, limit=400)
    if not res.converged:
        raise NumericalError(
            f"meta_proposed quadrature reached only {res.abs_error_estimate:.2e} at theta={theta}, gamma={gamma}")
    return float(min(max(res.value, 0.0), 1.0))


def direct_threshold(r: float, theta: float, gamma: float, params: SystemParams,
                     tables: DominantTables | None = None) -> float:
    """Root of ``conditional_success_approx(u) = gamma`` found by bracketing."""
    kappa, s = _threshold_terms(r, theta, params, tables)
    kappa, s = float(kappa), float(s)
    lg = math.log(gamma)

    def f(u):
        return -s * u - math.log1p(kappa * u) - lg

    hi = (1.0 / gamma - 1.0) / kappa
    if s > 0:
        hi = min(hi, -lg / s)
    return find_root_monotone(f, 0.0, hi, tol=1e-300)


def meta_direct(theta: float, gamma: float, params: SystemParams,
                tables: DominantTables | None = None, tol: float = 1e-10) -> float:
    """Same integral as :func:`meta_proposed` with the threshold found numerically."""
    _check_args(theta, gamma)
    if gamma <= 0:
        return 1.0
    if gamma >= 1:
        return 0.0
    tables = tables or tables_for(params)
    lo, hi, pts = _outer_limits(params, tables)

    def integrand(r):
        k = direct_threshold(r, theta, gamma, params, tables)
        return inverse_strength_cdf(k, params) * nearest_interferer_pdf(r, params)

    res = integrate(integrand, lo, hi, tol=tol, rtol=1e-10, points=pts, limit=400)
    if not res.converged:
        raise NumericalError(f"meta_direct quadrature did not converge at theta={theta}, gamma={gamma}")
    return float(min(max(res.value, 0.0), 1.0))
