import numpy as np
import pytest

from gietrenorm.fixtures import d4_loop, divergent_aiet, expanding_direction, golden_iet, periodic_iet


@pytest.fixture(scope="session")
def golden():
    return golden_iet()


@pytest.fixture(scope="session")
def d4():
    return periodic_iet(d4_loop())


@pytest.fixture(scope="session")
def divergent():
    loop = d4_loop()
    return divergent_aiet(loop, expanding_direction(loop), periods=12, dps=200)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def perturbed():
    from gietrenorm.fixtures import build_fixture

    return build_fixture({"fixture": "perturbed-aiet", "eps": 1e-3}, dps=200)
