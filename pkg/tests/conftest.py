import numpy as np
import pytest

from tfwdefect.crystal import solve_perfect
from tfwdefect.functional import TfwParams
from tfwdefect.lattice import Lattice
from tfwdefect.nuclear import Gaussian, GaussianSum, NuclearModel


def one_gaussian(Z=1.0, sigma=0.6):
    return GaussianSum((Gaussian(Z, (0.0, 0.0, 0.0), sigma),))


@pytest.fixture(scope="session")
def params():
    return TfwParams()


@pytest.fixture(scope="session")
def small_model():
    return NuclearModel(one_gaussian(1.0, 0.6), one_gaussian(1.0, 0.5))


@pytest.fixture(scope="session")
def small_lat():
    return Lattice(4.0, 1, 12)


@pytest.fixture(scope="session")
def small_state(small_model, small_lat, params):
    return solve_perfect(small_model, small_lat, params)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
