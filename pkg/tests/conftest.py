import pytest

from cayleylab import FreeAbelianL1, FreeGroup, enumerate_ball


@pytest.fixture(scope="session")
def F2():
    return FreeGroup(2)


@pytest.fixture(scope="session")
def Z2():
    return FreeAbelianL1(2)


@pytest.fixture(scope="session")
def f2_ball3(F2):
    return enumerate_ball(F2, 3)


@pytest.fixture(scope="session")
def f2_ball4(F2):
    return enumerate_ball(F2, 4)


@pytest.fixture(scope="session")
def z2_ball3(Z2):
    return enumerate_ball(Z2, 3)
