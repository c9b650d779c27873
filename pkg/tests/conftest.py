import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from burgerslab.fields import Grid

settings.register_profile(
    "repo", max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "repo"))


@pytest.fixture
def grid1():
    return Grid(1, 64)


@pytest.fixture
def grid2():
    return Grid(2, 32)


def trig_field(grid, coeffs, kmax=3):
    """Band-limited scalar field sum_k c_k cos(k.x) + s_k sin(k.x) on the grid."""
    rng = np.random.default_rng(coeffs)
    m = grid.mesh()
    f = np.zeros(grid.shape)
    for _ in range(6):
        k = rng.integers(-kmax, kmax + 1, size=grid.d)
        arg = sum(ki * xi for ki, xi in zip(k, m)) * 2 * np.pi / grid.box_length
        f += rng.normal() * np.cos(arg) + rng.normal() * np.sin(arg)
    return f


ACCEPTANCE = pytest.StashKey[list]()


@pytest.fixture(scope="session")
def acceptance_log(request):
    """Collects one verdict line per acceptance criterion for the terminal summary."""
    return request.config.stash.setdefault(ACCEPTANCE, [])


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)
