import numpy as np
import pytest

from liecontrol import systems


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


@pytest.fixture(scope="session")
def car():
    return systems.get("car")


@pytest.fixture(scope="session")
def oscillator():
    return systems.get("oscillator")


@pytest.fixture(scope="session")
def pvtol():
    return systems.get("pvtol")


@pytest.fixture(scope="session")
def bio_aug():
    return systems.get("bioreactor_augmented")
