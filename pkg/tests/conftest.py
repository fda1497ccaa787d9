import numpy as np
import pytest

from behavdist.core import DiscountSpec
from behavdist.models import toy_model


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def toy05():
    model = toy_model(0.5)
    return model, DiscountSpec.default_for(model)
