import numpy as np
import pytest

from tworoute.analysis import grenoble_scenario, symmetric_scenario


@pytest.fixture
def grenoble2000():
    return grenoble_scenario(2000.0)


@pytest.fixture
def grenoble3000():
    return grenoble_scenario(3000.0)


@pytest.fixture
def symmetric():
    return symmetric_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
