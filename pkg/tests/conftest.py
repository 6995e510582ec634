import numpy as np
import pytest

from cointqml import build_realization, get_model, simulate_euler
from cointqml.catalog import default_driver


@pytest.fixture(scope="session")
def spec2d():
    return get_model("canonical2d")


@pytest.fixture(scope="session")
def real2d(spec2d):
    return build_realization(spec2d, spec2d.theta0)


@pytest.fixture(scope="session")
def path2d(real2d):
    """One Euler path of the 2-d Brownian study (n = 2000)."""
    return simulate_euler(real2d, default_driver("canonical2d", "brownian"),
                          rng=np.random.default_rng(2024))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
