import numpy as np
import pytest
from hypothesis import settings

from singhyp.flow import VectorFieldSpec, integrate

settings.register_profile("singhyp", deadline=None, max_examples=60, derandomize=True)
settings.load_profile("singhyp")

DIAG = (-3.0, 2.0, 4.0, 10.0)


@pytest.fixture(scope="session")
def diag_field():
    return VectorFieldSpec.linear(np.diag(DIAG))


@pytest.fixture(scope="session")
def diag_orbit(diag_field):
    # stationary orbit at the origin; the cocycle is exp(t A) everywhere
    return integrate(diag_field, np.zeros(4), 50.0, 0.1)


@pytest.fixture(scope="session")
def lorenz():
    return VectorFieldSpec.lorenz()


@pytest.fixture(scope="session")
def lorenz_orbit(lorenz):
    return integrate(lorenz, [1.0, 1.0, 1.0], 200.0, 0.01, transient=50.0)
