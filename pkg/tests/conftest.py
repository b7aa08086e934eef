import pytest

from reprel import data_path
from reprel.dfoci import load as load_dfoci
from reprel.planner import load_operators
from reprel.taxi import TaxiEnv, load_instance


@pytest.fixture(scope="session")
def decl():
    return load_dfoci(data_path("taxi.dfoci"))


@pytest.fixture(scope="session")
def corrupt_decl():
    return load_dfoci(data_path("taxi_corrupt.dfoci"))


@pytest.fixture(scope="session")
def operators():
    return load_operators(data_path("taxi.ops"))


@pytest.fixture(scope="session")
def env3():
    return TaxiEnv(load_instance(data_path("verify3x3.taxi")))


@pytest.fixture(scope="session")
def task1():
    return TaxiEnv(load_instance(data_path("task1.taxi")))


@pytest.fixture(scope="session")
def task2():
    return TaxiEnv(load_instance(data_path("task2.taxi")))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
