import numpy as np
import pytest

from onebitdet.model import Scenario


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_scenario(rng, n=8, m=3, taus=None, sigma=None):
    H = rng.standard_normal((n, m))
    sigma = rng.uniform(0.5, 2.0, n) if sigma is None else sigma
    taus = rng.uniform(-1.0, 1.0, n) if taus is None else taus
    return Scenario(rng.standard_normal(m), H, sigma, taus)
