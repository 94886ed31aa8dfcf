import numpy as np
import pytest

from latentq.theory import LatentConfig


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def lqt():
    return LatentConfig.simplest(2)


@pytest.fixture
def qt():
    return LatentConfig.standard_qt()
