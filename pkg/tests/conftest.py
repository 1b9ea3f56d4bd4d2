import numpy as np
import pytest

from geodyn.metric import builtin, catalog


@pytest.fixture
def sphere():
    return builtin("sphere", {"r": 1.0})


@pytest.fixture
def polar():
    return builtin("polar2")


@pytest.fixture
def poincare():
    return builtin("poincare")


@pytest.fixture(scope="session")
def catalog_metrics():
    return catalog()


def pytest_configure(config):
    np.set_printoptions(precision=6, suppress=True)
