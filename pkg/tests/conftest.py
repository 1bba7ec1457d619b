import numpy as np
import pytest

from factories import piecewise_data
from src.tree import TrainConfig, grow


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False, help="run slow benchmark reproductions")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session")
def piecewise():
    return piecewise_data()


@pytest.fixture(scope="session")
def piecewise_model(piecewise):
    return grow(piecewise, TrainConfig(max_leaves=4))


@pytest.fixture
def rng():
    return np.random.default_rng(2024)
