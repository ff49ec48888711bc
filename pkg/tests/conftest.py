import numpy as np
import pytest

from gbdt.generators import scalar_desk, stationary_zero

# criterion lines recorded by test_acceptance.py, echoed in the terminal summary
ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def scalar():
    return scalar_desk()


@pytest.fixture
def stationary():
    return stationary_zero()


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)
