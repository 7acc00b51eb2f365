import numpy as np
import pytest

from steepwell.discretization import forms_for
from steepwell.model_config import NonlinearitySpec, box_problem


@pytest.fixture(scope="session")
def indefinite_params():
    """1-D well Ω=(0,1) in D=(-1,2), a0=-15, b0=0, p=4."""
    return box_problem(N=1, a0=-15.0, b0=0.0, lam=1e4, modes_per_dim=24, quadrature_panels=64,
                       nonlinearity=NonlinearitySpec("power", 4.0))


@pytest.fixture(scope="session")
def definite_params():
    return box_problem(N=1, a0=1.0, b0=1.0, lam=100.0, modes_per_dim=16, quadrature_panels=64,
                       nonlinearity=NonlinearitySpec("power", 4.0))


@pytest.fixture(scope="session")
def indefinite_forms(indefinite_params):
    return forms_for(indefinite_params)


@pytest.fixture(scope="session")
def definite_forms(definite_params):
    return forms_for(definite_params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
