import math

import pytest

from excursion_lab.laws import SRW1D, TwoPoint, Zeta
from excursion_lab.tilt import build_tilted

BETA_TWOPOINT = math.log(8 / 3)


@pytest.fixture(scope="session")
def zeta2_model():
    return build_tilted(Zeta(2.0), 1.0)


@pytest.fixture(scope="session")
def twopoint_model():
    # Q(1) = 2/3, Q(2) = 1/3, mu = 4/3
    return build_tilted(TwoPoint(0.5), BETA_TWOPOINT)


@pytest.fixture(scope="session")
def srw_model():
    return build_tilted(SRW1D(), 1.0)
