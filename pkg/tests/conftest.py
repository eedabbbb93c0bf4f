import numpy as np
import pytest

from bidirelay.core import Scenario, generate_channels


@pytest.fixture
def scenario2():
    return generate_channels(2, 2, 1.0, 10 ** 0.3, seed=7)


def make_scenario(h, sigma2=1.0, power=1.0):
    h = np.asarray(h, dtype=complex)
    return Scenario(h.shape[0], h.shape[2], h, sigma2, power)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])
