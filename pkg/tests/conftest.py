import numpy as np
import pytest

from pfcip.mesh import build_rect_mesh
from pfcip.operators import build_operators


@pytest.fixture(scope="session")
def unit_mesh_4():
    return build_rect_mesh(1.0, 1.0, 4, 4)


@pytest.fixture(scope="session")
def unit_ops_4(unit_mesh_4):
    return build_operators(unit_mesh_4, alpha=20.0)


@pytest.fixture(scope="session")
def unit_ops_8():
    return build_operators(build_rect_mesh(1.0, 1.0, 8, 8), alpha=20.0)


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)
