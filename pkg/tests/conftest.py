import numpy as np
import pytest

from flbo import fixtures


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def sphere2():
    return fixtures.icosphere(2)


@pytest.fixture(scope="session")
def sphere3():
    return fixtures.icosphere(3)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import SUMMARY

    if SUMMARY:
        terminalreporter.section("acceptance criteria")
        for number in sorted(SUMMARY):
            terminalreporter.write_line(SUMMARY[number])
