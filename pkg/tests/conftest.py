import numpy as np
import pytest

from cproj_lab.models import flat, fubini_study


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def fs2():
    return fubini_study(2)


@pytest.fixture(scope="session")
def flat2():
    return flat(2)
