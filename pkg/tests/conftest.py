import numpy as np
import pytest

from pmala.models import LogisticModel, synthetic_logistic


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture(scope="session")
def small_logistic():
    data = synthetic_logistic(3, n=120, d=4)
    return LogisticModel(data.design(), data.responses, prior_var=100.0)


def random_spd(rng, d):
    m = rng.normal(size=(d, d))
    return m @ m.T + d * np.eye(d)
