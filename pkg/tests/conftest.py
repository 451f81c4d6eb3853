import warnings

import numpy as np
import pytest

from digraph_nash.config import fixture_path, load_experiment
from digraph_nash.games import nonmonotone_linear_game, six_player_osnr

# equilibrium printed for the six-channel instance (4 decimals, mW)
PRINTED_NE = np.array([0.3329, 0.3375, 0.3412, 0.2305, 0.2361, 0.2421])

ACCEPTANCE_RESULTS = []


@pytest.fixture(scope="session")
def osnr_game():
    return six_player_osnr()


@pytest.fixture(scope="session")
def nonmonotone():
    return nonmonotone_linear_game()


@pytest.fixture
def osnr_experiment():
    return load_experiment(fixture_path("osnr_six_player"))


@pytest.fixture
def linear_experiment():
    return load_experiment(fixture_path("linear_nonmonotone"))


@pytest.fixture
def quiet():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        yield


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"criterion {num:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
