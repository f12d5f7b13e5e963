import numpy as np
import pytest

from helpers import ACCEPTANCE_LINES, random_instance


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def tiny_problem():
    return random_instance(np.random.default_rng(7), V=2, n=5, m=2, ratio=0.2)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
