"""Numerical kernel shared by the analytical methods and the simulator.

Adaptive quadrature is delegated to QUADPACK (``scipy.integrate.quad``), the
incomplete beta to ``scipy.special.betainc`` and bracketing to ``brentq``.
The principal Lambert W branch is implemented here because the reliability
threshold needs a log-domain evaluation path that library routines lack.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate as _integrate
from scipy import optimize as _optimize
from scipy import special as _special

_INV_E = math.exp(-1.0)
_EPS = np.finfo(float).eps

# Default tolerance budget for nested integrals.
INNER_TOL = 1e-10
MIDDLE_TOL = 1e-9
OUTER_TOL = 1e-8


class NumericalError(RuntimeError):
    """Raised when a numerical routine cannot reach its tolerance."""


class BracketError(NumericalError):
    """Raised when a root bracket does not contain a sign change."""


@dataclass(frozen=True)
class QuadratureResult:
    value: float | complex
    abs_error_estimate: float
    evaluations: int
    converged: bool

    def __float__(self) -> float:
        return float(np.real(self.value))


def integrate(
    f: Callable[[float], float | complex],
    a: float,
    b: float,
    tol: float = OUTER_TOL,
    rtol: float = 1e-10,
    limit: int = 200,
    points: list[float] | None = None,
    is_complex: bool = False,
) -> QuadratureResult:
    """Adaptive Gauss-Kronrod quadrature of ``f`` over ``[a, b]``.

    ``b`` may be ``np.inf``; QUADPACK then maps the half line onto ``(0, 1]``
    with ``x = a + (1 - t) / t`` before applying the 15-point rule. Nested
    double integrals are expressed by calling :func:`integrate` inside ``f``
    with its own (tighter) tolerance.

    Non-convergence is not raised; the best estimate is returned with
    ``converged=False``.
    """
    kwargs = dict(epsabs=tol, epsrel=rtol, limit=limit, full_output=True)
    if points is not None and np.isfinite(b):
        kwargs["points"] = sorted(p for p in points if a < p < b)
    if is_complex:
        kwargs["complex_func"] = True
    out = _integrate.quad(f, a, b, **kwargs)
    if is_complex:
        value, err, info = out
        info_r, info_i = info["real"], info["imag"]
        neval = info_r[0]["neval"] + info_i[0]["neval"]
        ier = int(len(info_r) > 1 or len(info_i) > 1)
        err = float(abs(err))
    else:
        value, err, info = out[0], out[1], out[2]
        neval = info["neval"]
        ier = 0 if len(out) == 3 else 1
    converged = ier == 0 and err <= max(tol, rtol * abs(value))
    return QuadratureResult(value, float(err), int(neval), bool(converged))


@lru_cache(maxsize=32)
def _gl_rule(order: int) -> tuple[np.ndarray, np.ndarray]:
    return np.polynomial.legendre.leggauss(order)


def gauss_legendre_panels(edges: np.ndarray, order: int = 8) -> tuple[np.ndarray, np.ndarray]:
    """Composite Gauss-Legendre nodes and weights on consecutive ``edges``.

    Returns arrays of shape ``(len(edges) - 1, order)``. Used by the vectorised
    moment kernels where thousands of smooth panels are integrated at once.
    """
    edges = np.asarray(edges, dtype=float)
    x, w = _gl_rule(order)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    return mid + half * x[None, :], half * w[None, :]


def _halley_w0(x: np.ndarray, w: np.ndarray) -> np.ndarray:
    for _ in range(60):
        ew = np.exp(w)
        f = w * ew - x
        wp1 = w + 1.0
        denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1)
        step = np.where(denom != 0, f / np.where(denom == 0, 1.0, denom), 0.0)
        w = w - step
        if np.all(np.abs(step) <= 4 * _EPS * np.maximum(1.0, np.abs(w))):
            break
    return w


def lambert_w0(x):
    """Principal branch ``W0(x)`` for real ``x >= -1/e``.

    Halley iteration from a branch-point series near ``-1/e``, a log
    asymptotic for large ``x`` and ``log1p`` in between.
    """
    xa = np.asarray(x, dtype=float)
    if np.any(xa < -_INV_E * (1 + 4 * _EPS)) or np.any(np.isnan(xa)):
        raise ValueError("lambert_w0 requires x >= -1/e")
    xa = np.maximum(xa, -_INV_E)
    scalar = xa.ndim == 0
    xa = np.atleast_1d(xa)
    w = np.empty_like(xa)

    near = xa < -0.25
    p = np.sqrt(np.maximum(2.0 * (math.e * xa[near] + 1.0), 0.0))
    w[near] = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p**3

    mid = (~near) & (xa <= 3.0)
    w[mid] = np.log1p(xa[mid]) * (1.0 - 0.3 * np.log1p(xa[mid]) / (1.0 + np.log1p(xa[mid])))

    big = (xa > 3.0) & np.isfinite(xa)
    l1 = np.log(xa[big])
    l2 = np.log(l1)
    w[big] = l1 - l2 + l2 / l1

    # branch point and +inf are exact; Halley would divide by zero there
    active = (xa > -_INV_E) & np.isfinite(xa)
    w[active] = _halley_w0(xa[active], w[active])
    w[xa == -_INV_E] = -1.0
    w[np.isposinf(xa)] = np.inf
    return float(w[0]) if scalar else w


def lambert_w0_exp(y):
    """``W0(exp(y))`` evaluated without forming ``exp(y)``.

    Solves ``w + log(w) = y`` by Halley iteration; valid for any real ``y``
    (very negative ``y`` falls back to the direct path).
    """
    ya = np.atleast_1d(np.asarray(y, dtype=float))
    out = np.empty_like(ya)
    direct = ya < 1.0
    if np.any(direct):
        out[direct] = lambert_w0(np.exp(ya[direct]))
    yl = ya[~direct]
    if yl.size:
        w = np.where(yl > 2.0, yl - np.log(yl) + np.log(yl) / yl, 0.5 + 0.35 * (yl - 1.0))
        for _ in range(60):
            f = w + np.log(w) - yl
            d1 = 1.0 + 1.0 / w
            d2 = -1.0 / (w * w)
            step = f / (d1 - 0.5 * f * d2 / d1)
            w = w - step
            if np.all(np.abs(step) <= 4 * _EPS * np.maximum(1.0, w)):
                break
        out[~direct] = w
    return float(out[0]) if np.ndim(y) == 0 else out


def regularized_incomplete_beta(x, a, b):
    """``I_x(a, b)`` for ``x`` in ``[0, 1]`` and ``a, b > 0``."""
    xa = np.asarray(x, dtype=float)
    if np.any(xa < 0) or np.any(xa > 1):
        raise ValueError("incomplete beta requires 0 <= x <= 1")
    if not (np.all(np.asarray(a) > 0) and np.all(np.asarray(b) > 0)):
        raise ValueError("incomplete beta requires a > 0 and b > 0")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("incomplete beta parameters must be finite")
    out = _special.betainc(a, b, xa)
    return float(out) if np.ndim(out) == 0 else out


def find_root_monotone(f: Callable[[float], float], lo: float, hi: float, tol: float = 1e-12) -> float:
    """Root of a monotone ``f`` bracketed by ``[lo, hi]`` (Brent's method)."""
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if np.sign(flo) == np.sign(fhi):
        raise BracketError(f"no sign change on [{lo!r}, {hi!r}]: f={flo!r}, {fhi!r}")
    return _optimize.brentq(f, lo, hi, xtol=tol, rtol=4 * _EPS, maxiter=500)


def random_stream(seed: int, *key: int) -> np.random.Generator:
    """Independent generator for ``(seed, *key)``; never shared between jobs."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=tuple(int(k) for k in key)))
