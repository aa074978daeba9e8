import numpy as np
import pytest

from models.orbit import OrbitSpec
from models.hermitian import HermitianModel, standard_r_matrix
from utils.data import sample_chart_points


def calibrated_model(n, k=1, scale=1.0):
    """Model with the known constants c = 1 / (2 scale), kappa = 2 / scale."""
    spec = OrbitSpec(n, k, scale)
    return HermitianModel(spec, standard_r_matrix(n, 1 / (2 * scale)), 2 / scale)


@pytest.fixture(scope="module")
def cp1():
    return calibrated_model(2)


@pytest.fixture(scope="module")
def cp2():
    return calibrated_model(3)


@pytest.fixture(scope="module")
def gr24():
    return calibrated_model(4, 2)


@pytest.fixture(scope="module")
def cp2_points(cp2):
    points = sample_chart_points(cp2.spec, 12, np.random.default_rng(7))
    return [p for p in points if cp2.gt(p).in_m0][:5]
