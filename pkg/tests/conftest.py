import numpy as np
import pytest
from hypothesis import settings

from risloc.config import build_scenario, paper_v

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


@pytest.fixture(scope="session")
def cfg():
    return paper_v()


@pytest.fixture(scope="session")
def scenario(cfg):
    """Preset geometry with every path (LOS included)."""
    return build_scenario(cfg, include_los=True)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
