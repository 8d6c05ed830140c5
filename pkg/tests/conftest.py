import numpy as np
import pytest
from hypothesis import settings

from afrelay import ChannelConfig, CovarianceSpec

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

ACCEPTANCE_LINES = []


def iid(n, rho=1.0, alpha=1.0, **kw):
    return ChannelConfig(n, n, n, rho, alpha, **kw)


def exponential_everywhere(n_s, n_r, n_d, r, rho=1.0, alpha=1.0, **kw):
    e = CovarianceSpec.exponential(r)
    return ChannelConfig(n_s, n_r, n_d, rho, alpha, e, e, e, e, **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
