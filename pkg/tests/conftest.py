import pytest

from streamqoe import QoeTarget, ServerRates

ACCEPTANCE_LINES = []


@pytest.fixture(scope="session")
def rates():
    return ServerRates(1.05, 0.15)


@pytest.fixture(scope="session")
def exps(rates):
    return rates.exponents()


@pytest.fixture(scope="session")
def target():
    return QoeTarget(20.0, 1e-3)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
