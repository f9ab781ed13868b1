import numpy as np
import pytest

from bpskink.core import KinkParams, ModelParams, make_grid


@pytest.fixture
def unit_model():
    return ModelParams(1.0, 1.0, 1.0)


@pytest.fixture
def unit_kink():
    return KinkParams(x0=0.0, q=1.0, sign=1)


@pytest.fixture
def relax_grid():
    return make_grid(-20.0, 20.0, 2001)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import LINES

    if LINES:
        terminalreporter.section("acceptance")
        for line in LINES:
            terminalreporter.write_line(line)
