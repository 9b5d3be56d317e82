import pytest

from uplink_meta.model import SystemParams


@pytest.fixture(scope="session")
def params():
    """Default parameter set (alpha=4, eps=0.4, rho=8e-6 W, p_max=0.2 W, noise=1e-9 W)."""
    return SystemParams()
