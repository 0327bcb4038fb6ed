import math

import pytest

from repeater_rate.keyrate import ChainParams
from repeater_rate.link import LinkParams


@pytest.fixture
def representative():
    """n=10 chain at L0=25 km with the default link (eta=0.9, q=10, L_att=25 km)."""
    return ChainParams(link=LinkParams(L0=25.0), n=10, x_ga=0.99, x_mm=0.999, tau_d=1.0)


@pytest.fixture
def noiseless():
    return ChainParams(link=LinkParams(L0=25.0, dark_rate=0.0), n=1, x_ga=1.0, x_mm=1.0, tau_d=math.inf)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)
