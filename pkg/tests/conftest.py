import numpy as np
import pytest

from zetasplit.geometry import config_from_dict
from zetasplit.verify import bundled_config


def constant_config(w=0.5, lengths=(1.0, 1.0)):
    """Closed circle with constant W = w (m = 1): spectrum +-sqrt((2 pi k / L)^2 + |w|^2)."""
    return config_from_dict({
        "name": "constant", "m": 1, "W0": [[[float(np.real(w)), float(np.imag(w))]]],
        "arcs": [{"length": L, "profile": {"kind": "constant"}} for L in lengths],
        "sigma1": [], "sigma2": [],
    })


@pytest.fixture(scope="session")
def generic():
    return bundled_config("generic")


@pytest.fixture(scope="session")
def mirror():
    return bundled_config("mirror")


@pytest.fixture(scope="session")
def free_channel():
    return bundled_config("free_channel")


@pytest.fixture(scope="session")
def domain_wall():
    return bundled_config("domain_wall")


@pytest.fixture(scope="session")
def invertible():
    return bundled_config("invertible")
