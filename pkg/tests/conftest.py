import math

import pytest

from lcc.car_following import REFERENCE_DRIVER, LinearGains, equilibrium_from_spacing, linearize
from lcc.system_builder import FeedbackGains, LccTopology

# Reference feedback cases A, B, C on n = m = 2 (mu_-2 = k_-2 = 0).
CASES = {
    "A": FeedbackGains({-1: 3.0}, {-1: -3.0}),
    "B": FeedbackGains({-1: 3.0, 1: -1.0}, {-1: -3.0, 1: -1.0}),
    "C": FeedbackGains({-1: 3.0, 1: -1.0, 2: -1.0}, {-1: -3.0, 1: -1.0, 2: -1.0}),
}


@pytest.fixture
def params():
    return REFERENCE_DRIVER


@pytest.fixture
def eq(params):
    return equilibrium_from_spacing(params, 20.0)


@pytest.fixture
def gains(params, eq):
    return linearize(params, eq)


@pytest.fixture
def unit_gains():
    return LinearGains(alpha1=1.0, alpha2=2.0, alpha3=1.0)


@pytest.fixture
def topo22():
    return LccTopology(n=2, m=2)


@pytest.fixture
def cases():
    return CASES


def alpha1_reference():
    # 0.6 * (30/2) * (pi/30) * sin(pi/2)
    return 0.6 * 15.0 * math.pi / 30.0
