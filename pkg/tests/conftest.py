import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / 'scripts'))


def pytest_configure(config):
    config.addinivalue_line('markers', 'slow: acceptance-scale run (minutes)')


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
