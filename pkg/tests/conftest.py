import numpy as np
import pytest

from parityexchange.model import reference_instance_degeneracy, reference_instance_fig1


@pytest.fixture(scope="session")
def fig1():
    return reference_instance_fig1()


@pytest.fixture(scope="session")
def degen():
    return reference_instance_degeneracy()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
