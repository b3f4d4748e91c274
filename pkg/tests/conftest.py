import numpy as np
import pytest

from isolab import ChartMetric, metric_from_spec


@pytest.fixture(scope="session")
def euclid2():
    return ChartMetric.euclidean(2)


@pytest.fixture(scope="session")
def sphere2():
    return ChartMetric.sphere(2)


@pytest.fixture(scope="session")
def hyper2():
    return ChartMetric.hyperbolic(2)


@pytest.fixture(scope="session")
def bump():
    return metric_from_spec("bump")


@pytest.fixture(scope="session")
def stereo():
    return ChartMetric.conformal("-log(1+(x^2+y^2)/4)", 2, chart_radius=4.0)


@pytest.fixture
def origin2():
    return np.zeros(2)
