"""Moments of the conditional success probability, beta fit and Gil-Pelaez inversion.

The interference exponent is reduced analytically before any quadrature.
For an interferer whose own link has length ``x`` and a receiver load ``s``,
write ``q = s p_t'(x) x^-alpha``. Swapping the order of the PGFL double
integral and substituting ``r = x y`` gives

    Psi_b(s) = 2 * E[F_b(q(X))],   pi lambda X^2 ~ Gamma(2, 1),
    F_b(q)   = int_1^inf y (1 - (1 + q y^-alpha)^-b) dy,

and ``F_b(q) = q^delta / alpha * Phi_b(log(1 + q))`` with ``delta = 2/alpha`` and
``Phi_b(T) = int_0^T e^t (e^t - 1)^(-1-delta) (1 - e^(-b t)) dt``. ``Phi_b``
is smooth after the change of variable ``t = s^(1/(1-delta))`` and has a fast
exponential series beyond ``T = 1``, so the whole kernel is one-dimensional
even for imaginary ``b``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy import special
from scipy.interpolate import CubicSpline

from .model import SystemParams, interferer_power, inverse_strength
from .numerics import NumericalError, gauss_legendre_panels, regularized_incomplete_beta

Kernel = Literal["pgfl-exact", "paper-literal"]

_SERIES_T = 1.0
_SERIES_TERMS = 48
# pi lambda R_u^2 beyond this carries probability e^-50
_TAU_CAP = 50.0


@dataclass(frozen=True)
class MomentValue:
    order: complex
    theta: float
    value: complex
    kernel: str = "pgfl-exact"

    @property
    def real(self) -> float:
        return float(np.real(self.value))


@dataclass(frozen=True)
class BetaShape:
    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError(f"beta shape must be finite and positive, got a={self.a}, b={self.b}")


class MomentError(NumericalError):
    """Moments inconsistent with a beta fit."""


class GilPelaezError(NumericalError):
    def __init__(self, message, partial=None, residual=None):
        super().__init__(message)
        self.partial = partial
        self.residual = residual


# ---------------------------------------------------------------------------
# one-dimensional kernel


def _omega(tau, delta):
    # e^t (t / (e^t - 1))^(1 + delta), smooth and equal to 1 at t = 0
    safe = np.where(tau > 0, tau, 1.0)
    ratio = np.where(tau > 0, safe / np.expm1(safe), 1.0)
    return np.exp(tau) * ratio ** (1.0 + delta)


def _one_minus_exp_over(tau, b):
    # (1 - e^(-b t)) / t, with the t -> 0 limit b
    safe = np.where(tau > 0, tau, 1.0)
    return np.where(tau > 0, -np.expm1(-b * safe) / safe, b)


def _series_tail(T, beta, delta):
    """``int_T^inf e^t (e^t - 1)^(-1-delta) e^(-beta t) dt`` for ``T >= 1``."""
    T = np.asarray(T, dtype=float)
    out = np.zeros(T.shape, dtype=complex)
    c = 1.0
    decay = np.exp(-T)
    term = np.exp(-(delta + beta) * T)
    n_terms = min(_SERIES_TERMS, int(math.ceil(40.0 / max(float(T.min(initial=1.0)), 1e-3))) + 2)
    for k in range(n_terms):
        out += c * term / (delta + k + beta)
        c *= (k + 1 + delta) / (k + 1)
        term = term * decay
    return out


def _phi_small_integrand(sig, b, delta):
    kappa = 1.0 / (1.0 - delta)
    tau = sig**kappa
    return kappa * _omega(tau, delta) * _one_minus_exp_over(tau, b)


def _phi_small(T, b, delta, order=8):
    """``Phi_b(T)`` for ``0 <= T <= 1``.

    Tabulated on a uniform grid in ``s = T^(1 - delta)`` (fine enough for the
    oscillation of ``exp(-b t)``) and read back with cubic Hermite
    interpolation using the exact derivative.
    """
    kappa = 1.0 / (1.0 - delta)
    sig_q = np.asarray(T, dtype=float) ** (1.0 - delta)
    n = int(max(256.0, 4.0 * kappa * abs(b))) + 1
    edges = np.linspace(0.0, _SERIES_T ** (1.0 - delta), n)
    h = edges[1] - edges[0]
    nodes, weights = gauss_legendre_panels(edges, order)
    f = _phi_small_integrand(nodes, b, delta)
    cum = np.concatenate([[0.0], np.cumsum(np.sum(f * weights, axis=1))])
    deriv = _phi_small_integrand(edges, b, delta)
    i = np.minimum((sig_q / h).astype(int), n - 2)
    x = sig_q / h - i
    h00 = (1 + 2 * x) * (1 - x) ** 2
    h10 = x * (1 - x) ** 2
    h01 = x * x * (3 - 2 * x)
    h11 = x * x * (x - 1)
    return h00 * cum[i] + h10 * h * deriv[i] + h01 * cum[i + 1] + h11 * h * deriv[i + 1]


def _phi_anchor(b, delta):
    # Phi_b(1) exactly, by the same panels
    n = int(max(64.0, 2.0 * abs(b) / (1.0 - delta))) + 1
    edges = np.linspace(0.0, _SERIES_T ** (1.0 - delta), n)
    nodes, weights = gauss_legendre_panels(edges, 8)
    return np.sum(_phi_small_integrand(nodes, b, delta) * weights)


def phi_kernel(T, b, delta):
    """``Phi_b(T) = int_0^T e^t (e^t - 1)^(-1-delta) (1 - e^(-b t)) dt``."""
    T = np.asarray(T, dtype=float)
    out = np.empty(T.shape, dtype=complex)
    small = T <= _SERIES_T
    if np.any(small):
        out[small] = _phi_small(T[small], b, delta)
    big = ~small
    if np.any(big):
        anchor = _phi_anchor(b, delta)
        t1 = np.array([_SERIES_T])
        base = anchor + _series_tail(t1, 0.0, delta)[0] - _series_tail(t1, b, delta)[0]
        out[big] = base - _series_tail(T[big], 0.0, delta) + _series_tail(T[big], b, delta)
    return out


def link_kernel(q, b, alpha):
    """``F_b(q) = int_1^inf y (1 - (1 + q y^-alpha)^-b) dy`` for real ``q >= 0``.

    ``b`` may be complex with non-negative real part.
    """
    q = np.asarray(q, dtype=float)
    delta = 2.0 / alpha
    if b == 0:
        return np.zeros(q.shape, dtype=complex)
    out = q**delta / alpha * phi_kernel(np.log1p(q), complex(b), delta)
    return out


def link_kernel_first(q, alpha):
    """``F_1(q)`` for complex ``q`` through the Gauss hypergeometric function."""
    q = np.asarray(q, dtype=complex)
    delta = 2.0 / alpha
    return q / (alpha * (1.0 - delta)) * special.hyp2f1(1.0, 1.0 - delta, 2.0 - delta, -q)


def _log_edges(lo, hi, per_unit, breaks=()):
    # panel edges uniform in log, with the given break points as extra edges
    pts = [math.log(lo)] + sorted(math.log(b) for b in breaks if lo < b < hi) + [math.log(hi)]
    out = [np.array([pts[0]])]
    for a, b in zip(pts[:-1], pts[1:]):
        n = max(1, int(math.ceil((b - a) * per_unit)))
        out.append(np.linspace(a, b, n + 1)[1:])
    return np.concatenate(out)


def _link_nodes(params: SystemParams, panels_per_unit: float = 4.0, order: int = 8):
    # pi lambda x^2 ~ Gamma(2, 1): log-spaced panels from 1e-10 to 60, split at
    # the power-control crossover where the gain has a kink
    tc = math.pi * params.bs_density * params.crossover_radius**2
    edges = _log_edges(1e-10, 60.0, panels_per_unit, (tc,))
    nodes, weights = gauss_legendre_panels(edges, order)
    t = np.exp(nodes).ravel()
    w = (weights.ravel() * t) * t * np.exp(-t)
    x = np.sqrt(t / (math.pi * params.bs_density))
    gain = interferer_power(x, params) * x ** (-params.path_loss)
    return gain, w


def interference_exponent(s, b, params: SystemParams, panels_per_unit: float = 4.0):
    """``Psi_b(s)`` such that ``E[prod_x (1 + s g_x)^-b] = exp(-Psi_b(s))``.

    ``s`` is a (vector of) non-negative receiver loads. Complex ``s`` is
    accepted only with ``b = 1``.
    """
    s = np.asarray(s)
    gain, w = _link_nodes(params, panels_per_unit)
    q = s.reshape(-1, 1) * gain[None, :]
    if np.iscomplexobj(s):
        if b != 1:
            raise ValueError("complex loads are only supported for b = 1")
        f = link_kernel_first(q, params.path_loss)
    else:
        f = link_kernel(q.ravel(), b, params.path_loss).reshape(q.shape)
    psi = 2.0 * (f @ w)
    return psi.reshape(s.shape) if s.ndim else complex(psi[0])


def laplace_interference(s, params: SystemParams):
    """Laplace transform of the aggregate uplink interference at the typical BS."""
    s = np.asarray(s)
    if np.any(np.real(s) < 0):
        raise ValueError("Re(s) must be >= 0")
    if np.iscomplexobj(s):
        out = np.exp(-interference_exponent(s.astype(complex), 1, params))
    else:
        out = np.exp(-interference_exponent(s.astype(float), 1, params).real)
    return out if out.ndim else out.item()


# ---------------------------------------------------------------------------
# moments


def moment_b(theta: float, b, params: SystemParams, kernel: Kernel = "pgfl-exact") -> MomentValue:
    """``b``-th moment of the conditional success probability at SINR threshold ``theta``.

    ``pgfl-exact`` raises each interferer factor to the power ``b``;
    ``paper-literal`` evaluates the first-moment Laplace transform at ``b``
    times the load. The two coincide at ``b = 1``.
    """
    if not theta > 0:
        raise ValueError("theta must be > 0")
    b = complex(b)
    if b == 0:
        return MomentValue(b, theta, 1.0 + 0j, kernel)
    if b.real < 0:
        raise ValueError("order must have non-negative real part")
    if kernel not in ("pgfl-exact", "paper-literal"):
        raise ValueError(f"unknown kernel {kernel!r}")
    bb = b.real if b.imag == 0 else b
    value = _moment_integral(theta, bb, params, _TAU_CAP, kernel)
    if b.imag == 0:
        value = complex(value.real, 0.0)
    return MomentValue(b, theta, complex(value), kernel)


def beta_shape(m1: float, m2: float) -> BetaShape:
    var = m2 - m1 * m1
    if not var > 0:
        raise MomentError(f"non-positive variance estimate M2 - M1^2 = {var:.3e}")
    if not m1 >= m2:
        raise MomentError(f"moment inconsistency: M1={m1} < M2={m2}")
    return BetaShape(m1 * (m1 - m2) / var, (m1 - m2) * (1.0 - m1) / var)


def beta_meta(theta: float, gamma, params: SystemParams, kernel: Kernel = "pgfl-exact",
              moments: tuple[float, float] | None = None):
    """Beta approximation ``1 - I_gamma(a, b)`` matched to the first two moments."""
    if moments is None:
        m1 = moment_b(theta, 1, params, kernel).real
        m2 = moment_b(theta, 2, params, kernel).real
    else:
        m1, m2 = moments
    shape = beta_shape(m1, m2)
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0) or np.any(g > 1):
        raise ValueError("gamma must lie in [0, 1]")
    out = 1.0 - regularized_incomplete_beta(g, shape.a, shape.b)
    return float(out) if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Gil-Pelaez inversion


def _radius_at_strength(u: float, params: SystemParams) -> float:
    """Smallest link length whose ``r^alpha / p_t(r)`` reaches ``u``."""
    a, e = params.path_loss, params.compensation
    rc = params.crossover_radius
    uc = float(inverse_strength(rc, params))
    if u >= uc:
        return (u * params.max_power) ** (1.0 / a)
    if e == 1.0:
        return 0.0
    return (u * params.power_control) ** (1.0 / (a * (1.0 - e)))


@dataclass(frozen=True)
class _Restriction:
    tau_max: float      # pi lambda z*^2, links beyond are below every gamma queried
    mass: float         # P(pi lambda R_u^2 <= tau_max)


def _restriction(theta: float, gamma_min: float, params: SystemParams, tau_cap: float = 50.0):
    if params.noise == 0 or gamma_min <= 0:
        return _Restriction(tau_cap, -math.expm1(-tau_cap))
    u_star = -math.log(gamma_min) / (theta * params.noise)
    z = _radius_at_strength(u_star, params)
    tau = min(math.pi * params.bs_density * z * z, tau_cap)
    return _Restriction(tau, -math.expm1(-tau))


def _psi_any(s, b, params, kernel, panels_per_unit):
    if kernel == "pgfl-exact":
        return interference_exponent(s, b, params, panels_per_unit)
    if kernel == "paper-literal":
        return interference_exponent(b * s, 1, params, panels_per_unit)
    raise ValueError(f"unknown kernel {kernel!r}")


def _psi_table(theta, b, params, kernel, s_lo, s_hi, step):
    """Spline of ``Psi`` in ``log s`` on ``[s_lo, s_hi]``; loads beyond the
    first ``Re Psi > 40`` are dropped (their contribution underflows)."""
    ls = np.arange(math.log(s_lo), math.log(s_hi) + step, step)
    psi = _psi_any(np.exp(ls), b, params, kernel, 2.0)
    dead = np.nonzero(psi.real > 40.0)[0]
    if dead.size:
        end = max(dead[0] + 1, 4)
        ls, psi = ls[:end], psi[:end]
    if ls.size < 4:
        ls = np.linspace(math.log(s_lo), math.log(s_hi), 4)
        psi = _psi_any(np.exp(ls), b, params, kernel, 2.0)
    return CubicSpline(ls, psi), math.exp(ls[-1])


def _moment_integral(theta: float, b: complex, params: SystemParams, tau_hi: float,
                     kernel: Kernel = "pgfl-exact", tau_min: float = 1e-10,
                     phase_step: float = 3.0, psi_step: float | None = 0.05) -> complex:
    """``E[P_s^b 1{pi lambda R_u^2 <= tau_hi}]`` for complex ``b``, ``Re b >= 0``.

    The interference exponent is tabulated on a grid in ``log(theta u)`` with
    spacing ``psi_step`` (``None`` evaluates it at every node). Gauss-Legendre
    panels in ``log tau`` then span at most ``phase_step`` radians of the
    integrand's phase and half a unit of ``log tau``.
    """
    lam = math.pi * params.bs_density
    if tau_hi <= tau_min:
        return complex(-math.expm1(-tau_hi))
    tc = lam * params.crossover_radius**2
    noise = theta * params.noise

    def load(tau):
        return theta * inverse_strength(np.sqrt(tau / lam), params)

    if psi_step is None:
        def psi(s):
            return _psi_any(s, b, params, kernel, 4.0)
    else:
        s_lo, s_hi = float(load(tau_min)), float(load(tau_hi))
        table, s_dead = _psi_table(theta, b, params, kernel, s_lo, max(s_hi, s_lo * 1.001), psi_step)
        if s_dead < s_hi:
            tau_hi = min(tau_hi, lam * _radius_at_strength(s_dead / theta, params) ** 2)

        def psi(s):
            return table(np.log(s))

    coarse = np.geomspace(tau_min, tau_hi, 401)
    if tau_min < tc < tau_hi:
        coarse = np.unique(np.append(coarse, tc))
    s_c = load(coarse)
    phase_c = b.imag * noise * s_c / theta + psi(s_c).imag
    measure = np.abs(np.diff(phase_c)) / phase_step + np.diff(np.log(coarse)) * 2.0
    measure = np.concatenate([[0.0], np.cumsum(measure)])
    n_pan = max(1, int(math.ceil(measure[-1])))
    edges = np.interp(np.linspace(0.0, measure[-1], n_pan + 1), measure, np.log(coarse))
    if tau_min < tc < tau_hi:
        edges = np.unique(np.append(edges, math.log(tc)))
    nodes, weights = gauss_legendre_panels(edges, 8)
    tau = np.exp(nodes).ravel()
    w = weights.ravel() * tau
    s_n = load(tau)
    value = 0j
    for chunk in np.array_split(np.arange(tau.size), max(1, tau.size // 2048)):
        sc = s_n[chunk]
        expo = tau[chunk] + psi(sc) + b * noise * sc / theta
        value += np.sum(w[chunk] * np.exp(-expo))
    # the integrand is ~1 on [0, tau_min]
    return complex(value + tau_min)


def restricted_moment(theta: float, t: float, params: SystemParams, restriction: _Restriction,
                      kernel: Kernel = "pgfl-exact", **kw) -> complex:
    """``E[P_s^(jt) 1{pi lambda R_u^2 <= tau_max}]``."""
    if t == 0:
        return complex(restriction.mass)
    return _moment_integral(theta, 1j * t, params, restriction.tau_max, kernel, **kw)


@dataclass(frozen=True)
class GilPelaezResult:
    gamma: np.ndarray
    value: np.ndarray
    t_max: float
    residual: float
    knots: int


def _knot_grid(t0: float, t1: float, step0: float, rel_step: float) -> np.ndarray:
    out = [t0]
    t = t0
    while t < t1:
        t = min(t1, t + max(step0, rel_step * t))
        out.append(t)
    return np.array(out)


def gil_pelaez_meta(theta: float, gamma, params: SystemParams, kernel: Kernel = "pgfl-exact",
                    tail_tol: float = 1e-4, t_start: float = 10.0, t_limit: float = 1e5,
                    step0: float | None = None, rel_step: float = 0.02) -> GilPelaezResult:
    """Meta distribution by Gil-Pelaez inversion of the imaginary moments.

    ``F(gamma) = p/2 + 1/pi int_0^inf Im(e^(-jt log gamma) M_jt) / t dt``, where
    the moments are restricted to links whose noise factor alone is at least
    the smallest ``gamma`` requested (other links cannot exceed it), ``p``
    being their probability. ``M_jt`` is computed on knots, cubic-splined in
    ``t`` and the inversion integral is done on the spline. The upper limit
    grows by decades until ``|M_jt| / t`` stays below ``tail_tol`` over the
    last decade.
    """
    if not theta > 0:
        raise ValueError("theta must be > 0")
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(g < 0) or np.any(g > 1):
        raise ValueError("gamma must lie in [0, 1]")
    inner = g[(g > 0) & (g < 1)]
    g_min = float(inner.min()) if inner.size else 0.5
    restr = _restriction(theta, g_min, params)
    span = max(1.0, -math.log(g_min))
    if step0 is None:
        step0 = 0.25 / span

    knots = _knot_grid(0.0, t_start, step0, rel_step)
    vals = [restricted_moment(theta, t, params, restr, kernel) for t in knots]
    t_max = t_start
    while True:
        tail = (knots >= t_max / 10) & (knots > 0)
        residual = float(np.max(np.abs(np.array(vals)[tail]) / knots[tail]))
        if residual <= tail_tol:
            break
        if t_max >= t_limit:
            partial = _gp_integrate(knots, np.array(vals), restr.mass, inner)
            raise GilPelaezError(
                f"Gil-Pelaez tail |M|/t = {residual:.2e} above {tail_tol:.1e} at t = {t_max:g}",
                partial=partial, residual=residual)
        new = _knot_grid(t_max, 10 * t_max, step0, rel_step)[1:]
        vals += [restricted_moment(theta, t, params, restr, kernel) for t in new]
        knots = np.concatenate([knots, new])
        t_max *= 10

    out = np.empty(g.shape)
    out[g <= 0] = 1.0
    out[g >= 1] = 0.0
    mid = (g > 0) & (g < 1)
    out[mid] = _gp_integrate(knots, np.array(vals), restr.mass, g[mid])
    return GilPelaezResult(g, np.clip(out, 0.0, 1.0), t_max, residual, len(knots))


def _gp_integrate(knots, vals, mass, gammas, per_interval: int = 4):
    spline = CubicSpline(knots, vals)
    nodes, weights = gauss_legendre_panels(knots, per_interval)
    t = nodes.ravel()
    w = weights.ravel()
    m = spline(t)
    x = np.log(np.asarray(gammas, dtype=float))
    integrand = np.imag(np.exp(-1j * t[None, :] * x[:, None]) * m[None, :]) / t[None, :]
    return mass / 2.0 + (integrand @ w) / math.pi
