import pathlib

import numpy as np
import pytest

from mflq.cli import load_problem

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def load(name):
    spec, opts = load_problem(str(FIXTURES / name))
    return spec


@pytest.fixture(scope="session")
def ex5_1():
    return load("ex5_1.json")


@pytest.fixture(scope="session")
def ex5_2():
    return load("ex5_2.json")


@pytest.fixture(scope="session")
def ex5_3():
    return load("ex5_3.json")


@pytest.fixture(scope="session")
def ex5_3_printed():
    return load("ex5_3_printed_qbar.json")


@pytest.fixture(scope="session")
def ex5_4():
    return load("ex5_4.json")


@pytest.fixture(scope="session")
def ex5_5():
    return load("ex5_5.json")


@pytest.fixture(scope="session")
def ex5_6():
    return load("ex5_6.json")


@pytest.fixture(scope="session")
def ex5_7():
    return load("ex5_7.json")


def rng(seed):
    return np.random.default_rng(seed)


def random_stable_matrix(gen, n, margin=0.3):
    """A matrix with spectral abscissa <= -margin."""
    M = gen.normal(size=(n, n))
    shift = max(np.linalg.eigvals(M).real.max(), 0.0) + margin
    return M - shift * np.eye(n)
