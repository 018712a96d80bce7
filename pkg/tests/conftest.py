import numpy as np
import pytest

from hpflow import make_case, make_system

from support import FIGURE_INERTIA, FIGURE_X0


@pytest.fixture(scope="session")
def rigid_system():
    return make_system(FIGURE_INERTIA)


@pytest.fixture(scope="session")
def case1(rigid_system):
    return make_case(rigid_system, 1)


@pytest.fixture(scope="session")
def case2(rigid_system):
    return make_case(rigid_system, 2)


@pytest.fixture(scope="session")
def x0():
    return np.array(FIGURE_X0)
