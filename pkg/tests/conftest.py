import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mbhts.precoding import coupling_matrix, make_precoder
from mbhts.scenario import SystemParams, draw_channel

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    return SystemParams()


def drop_coupling(params, seed, precoder):
    """Coupling matrix of the seeded default drop."""
    _, channel = draw_channel(params, seed)
    W = make_precoder(precoder, channel.H, params.noise_power, params.max_power_w)
    return coupling_matrix(channel.H, W)


def random_coupling(rng, K, leak=0.05):
    """Diagonally dominant non-negative coupling matrix."""
    mu = rng.uniform(0.0, leak, size=(K, K))
    np.fill_diagonal(mu, rng.uniform(0.2, 2.0, size=K))
    return mu
