import numpy as np
import pytest

from fcca.model_sim import population_operators, random_model, toy_model_2


@pytest.fixture(scope="session")
def toy():
    return toy_model_2()


@pytest.fixture(scope="session")
def toy_blocks(toy):
    return population_operators(toy)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def make_random_models(count, J=4, p=16, seed=0):
    rng = np.random.default_rng(seed)
    return [random_model(rng, J, p) for _ in range(count)]
