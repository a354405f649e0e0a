import numpy as np
import pytest

from builtin_metrics import builtin_metric
from geometry import FinslerGeometry
from metric_dsl import PointState

EX1_POINT = PointState((0.0, 1.0, 0.0, 0.0), (1.0, 1.0, 1.0, 1.0))
EX2_SLICE_POINT = PointState((1.0, 1.0, 1.0), (1.0, 1.0, 2.0))
EX3_POINT = PointState((0.3, 0.0, 0.0), (0.7, 1.2, 0.9))
HYPERBOLIC_POINT = PointState((0.4, -0.2), (0.8, 1.3))


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def ex1():
    return builtin_metric("ex1")


@pytest.fixture(scope="session")
def ex2():
    return builtin_metric("ex2")


@pytest.fixture(scope="session")
def ex3():
    return builtin_metric("ex3")


@pytest.fixture(scope="session")
def hyperbolic():
    return builtin_metric("riem-hyperbolic")


@pytest.fixture(scope="session")
def euclid3():
    return builtin_metric("euclid3")


@pytest.fixture(scope="session")
def ex1_bundle(ex1):
    return FinslerGeometry(ex1, EX1_POINT).bundle()


@pytest.fixture(scope="session")
def ex2_slice_bundle(ex2):
    return FinslerGeometry(ex2, EX2_SLICE_POINT).bundle()


@pytest.fixture(scope="session")
def ex3_bundle(ex3):
    return FinslerGeometry(ex3, EX3_POINT).bundle()


@pytest.fixture(scope="session")
def hyperbolic_bundle(hyperbolic):
    return FinslerGeometry(hyperbolic, HYPERBOLIC_POINT).bundle()


@pytest.fixture(scope="session")
def euclid3_bundle(euclid3):
    return FinslerGeometry(euclid3, PointState((0.0, 0.0, 0.0), (1.0, 2.0, 3.0))).bundle()
