"""Uplink SINR meta distribution of Poisson cellular networks.

Three analytical methods (dominant-interferer approximation, beta
approximation, Gil-Pelaez inversion) and a Monte-Carlo network simulator.
"""

__version__ = "0.1.0"

from .dominant import meta_direct, meta_proposed, reliability_threshold, residual_interference  # noqa: E402
from .model import SystemParams  # noqa: E402
from .moments import beta_meta, gil_pelaez_meta, laplace_interference, moment_b  # noqa: E402
from .simulation import SimConfig, empirical_meta, empirical_moment, sample_network  # noqa: E402

__all__ = [
    "SystemParams", "SimConfig",
    "meta_proposed", "meta_direct", "reliability_threshold", "residual_interference",
    "laplace_interference", "moment_b", "beta_meta", "gil_pelaez_meta",
    "sample_network", "empirical_meta", "empirical_moment",
]
