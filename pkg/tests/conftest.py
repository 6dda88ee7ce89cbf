import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.dirname(__file__))

DATA_CSV = os.path.join(os.path.dirname(__file__), "..", "data", "axis_bank_2000.csv")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def axis_csv() -> str:
    return os.path.abspath(DATA_CSV)
