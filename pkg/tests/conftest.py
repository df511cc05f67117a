import numpy as np
import pytest

from helpers import random_chain, three_link_planar, two_link_planar


@pytest.fixture(scope="session")
def planar2():
    return two_link_planar()


@pytest.fixture(scope="session")
def planar3():
    return three_link_planar()


@pytest.fixture(scope="session")
def chain7():
    return random_chain(7, seed=42)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)
