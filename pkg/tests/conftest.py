import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile(
    "default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

FHN_THETA = (0.1, 1.2, 0.3, 0.8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)
