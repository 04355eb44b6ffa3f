import numpy as np
import pytest

from pdegreedy import generate_synthetic, get_pde_spec


@pytest.fixture(scope="session")
def small_snapshot():
    """Cheap random smooth field for sampler and IO tests."""
    spec = get_pde_spec("burgers")
    return generate_synthetic(spec, 48, 25, (-8.0, 8.0, 2.0),
                              init="random-fourier", seed=11)


@pytest.fixture(scope="session")
def allen_cahn_snapshot():
    return generate_synthetic(get_pde_spec("allen-cahn"), 512, 201,
                              (-1.0, 1.0, 1.0), init="cosine-bump")


@pytest.fixture(scope="session")
def burgers_snapshot():
    return generate_synthetic(get_pde_spec("burgers"), 256, 101,
                              (-8.0, 8.0, 10.0), init="gaussian")


@pytest.fixture(scope="session")
def kdv_snapshot():
    return generate_synthetic(get_pde_spec("kdv"), 512, 201,
                              (-30.0, 30.0, 20.0), init="two-soliton")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
