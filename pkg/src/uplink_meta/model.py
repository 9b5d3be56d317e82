"""System parameters, truncated fractional power control and distance laws.

All powers are in watts and all distances in meters. Functions accept scalars
or numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np

# The BS density behind the published curves is not stated; this is our default.
DEFAULT_BS_DENSITY = 1e-5


@dataclass(frozen=True)
class SystemParams:
    """Physical-layer constants of the uplink Poisson network.

    Attributes:
        bs_density: BS intensity (per m^2).
        path_loss: path-loss exponent, > 2.
        compensation: fractional power-control compensation factor in (0, 1].
        power_control: power-control constant rho (W).
        max_power: maximum UE transmit power (W).
        noise: thermal noise power (W).
    """

    bs_density: float = DEFAULT_BS_DENSITY
    path_loss: float = 4.0
    compensation: float = 0.4
    power_control: float = 8e-6
    max_power: float = 0.2
    noise: float = 1e-9

    def __post_init__(self):
        if not self.bs_density > 0:
            raise ValueError(f"bs_density must be > 0, got {self.bs_density}")
        if not self.path_loss > 2:
            raise ValueError(f"path_loss must be > 2 for a finite interference, got {self.path_loss}")
        if not 0 < self.compensation <= 1:
            raise ValueError(f"compensation must be in (0, 1], got {self.compensation}")
        if not self.power_control > 0:
            raise ValueError(f"power_control must be > 0, got {self.power_control}")
        if not self.max_power > 0:
            raise ValueError(f"max_power must be > 0, got {self.max_power}")
        if not self.noise >= 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")

    @classmethod
    def from_milliwatts(cls, *, rho_mw: float, p_max_mw: float, noise_w: float, **kw) -> "SystemParams":
        return cls(power_control=rho_mw * 1e-3, max_power=p_max_mw * 1e-3, noise=noise_w, **kw)

    def replace(self, **changes) -> "SystemParams":
        d = asdict(self)
        d.update(changes)
        return SystemParams(**d)

    @property
    def crossover_radius(self) -> float:
        """Link length beyond which a UE transmits at ``max_power``."""
        return (self.max_power / self.power_control) ** (1.0 / (self.path_loss * self.compensation))

    @property
    def mean_cell_radius(self) -> float:
        return 1.0 / math.sqrt(math.pi * self.bs_density)


@dataclass(frozen=True)
class LinkDistances:
    serving: float
    interferer_link: float
    interferer_to_bs: float
    nearest_interferer: float

    def __post_init__(self):
        vals = (self.serving, self.interferer_link, self.interferer_to_bs, self.nearest_interferer)
        if min(vals) < 0:
            raise ValueError("distances must be non-negative")
        if self.interferer_link > self.interferer_to_bs:
            raise ValueError("an interferer is closer to its own BS than to the typical BS")


def _check_nonneg(r, name="r"):
    r = np.asarray(r, dtype=float)
    if np.any(r < 0) or np.any(np.isnan(r)):
        raise ValueError(f"{name} must be >= 0")
    return r


def _out(x):
    return float(x) if np.ndim(x) == 0 else x


def transmit_power(r, params: SystemParams):
    """Truncated fractional path-loss inversion ``min(rho r^(alpha eps), p_max)``."""
    r = _check_nonneg(r)
    ae = params.path_loss * params.compensation
    rc = params.crossover_radius
    p = np.where(r < rc, params.power_control * r**ae, params.max_power)
    return _out(p)


# The interferer power law has the same form as the serving one.
interferer_power = transmit_power


def received_strength(r, params: SystemParams):
    """Mean received power ``p_t(r) r^-alpha`` at the serving BS."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("received_strength is singular at r = 0")
    return _out(transmit_power(r, params) * r ** (-params.path_loss))


def inverse_strength(r, params: SystemParams):
    """``r^alpha / p_t(r)``, the reciprocal of :func:`received_strength`."""
    r = _check_nonneg(r)
    a, e = params.path_loss, params.compensation
    rc = params.crossover_radius
    u = np.where(r < rc, r ** (a * (1.0 - e)) / params.power_control, r**a / params.max_power)
    return _out(u)


class DistanceLaw(NamedTuple):
    pdf: Callable
    cdf: Callable


def serving_pdf(r, params: SystemParams):
    r = _check_nonneg(r)
    lam = params.bs_density
    return _out(2 * math.pi * lam * r * np.exp(-math.pi * lam * r * r))


def serving_cdf(r, params: SystemParams):
    r = _check_nonneg(r)
    return _out(-np.expm1(-math.pi * params.bs_density * r * r))


def serving_distance_law(params: SystemParams) -> DistanceLaw:
    """Rayleigh law of the UE-to-serving-BS distance."""
    return DistanceLaw(lambda r: serving_pdf(r, params), lambda r: serving_cdf(r, params))


def interferer_link_pdf(r, d_i, params: SystemParams):
    """Density of an interferer's own link length given its distance ``d_i``
    to the typical BS (Rayleigh truncated to ``[0, d_i]``)."""
    r = _check_nonneg(r)
    d_i = np.asarray(d_i, dtype=float)
    if np.any(d_i <= 0):
        raise ValueError("d_i must be > 0")
    if np.any(r > d_i):
        raise ValueError("interferer link length cannot exceed its distance to the typical BS")
    lam = params.bs_density
    norm = -np.expm1(-math.pi * lam * d_i * d_i)
    return _out(2 * math.pi * lam * r * np.exp(-math.pi * lam * r * r) / norm)


def interferer_intensity(d, params: SystemParams):
    """Intensity ``lambda (1 - exp(-pi lambda d^2))`` of interferers at distance ``d``."""
    d = _check_nonneg(d, "d")
    lam = params.bs_density
    return _out(-lam * np.expm1(-math.pi * lam * d * d))


def interferer_mass(r, params: SystemParams):
    """``J(r) = int_0^r (1 - exp(-pi lambda z^2)) z dz`` in closed form."""
    r = _check_nonneg(r)
    lam = params.bs_density
    x = math.pi * lam * r * r
    # x - (1 - e^-x) cancels for small x; use its series there
    small = x < 1e-2
    xs = np.where(small, x, 0.0)
    series = xs * xs * (0.5 - xs / 6 + xs * xs / 24 - xs**3 / 120)
    h = np.where(small, series, x + np.expm1(-np.where(small, 0.0, x)))
    return _out(h / (2 * math.pi * lam))


def nearest_interferer_pdf(r, params: SystemParams):
    r = _check_nonneg(r)
    lam = params.bs_density
    j = interferer_mass(r, params)
    return _out(2 * math.pi * lam * (-np.expm1(-math.pi * lam * r * r)) * r * np.exp(-2 * math.pi * lam * j))


def nearest_interferer_cdf(r, params: SystemParams):
    lam = params.bs_density
    return _out(-np.expm1(-2 * math.pi * lam * interferer_mass(r, params)))
