import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: Monte Carlo checks that take tens of seconds")


@pytest.fixture
def rng():
    return np.random.default_rng(42)
