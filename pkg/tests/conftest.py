import numpy as np
import pytest

from pdemas.params import PlantParams
from pdemas.grid import SpatialGrid


@pytest.fixture(scope="session")
def plant5() -> PlantParams:
    """The five-agent experiment plant."""
    return PlantParams(
        alpha=1.0, lam=5.0, robin_l=1.0, gains=(0.1, 0.2, 0.3, 0.4, 0.5), n_agents=5
    )


@pytest.fixture
def grid100() -> SpatialGrid:
    return SpatialGrid(100)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260823)
