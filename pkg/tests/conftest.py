import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gpexp.scenarios import build_preset

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

#: one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES, key=lambda k: (int(k.split("-")[0]), k)):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def public():
    return build_preset("public")


@pytest.fixture(scope="session")
def private():
    return build_preset("private")


@pytest.fixture(scope="session")
def degenerate():
    return build_preset("degenerate")
