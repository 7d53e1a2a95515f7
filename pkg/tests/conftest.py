import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from manp.grid import EdgeField, GridSpec

settings.register_profile("manp", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("manp")

# criterion number -> (passed, detail); filled by test_acceptance
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_edge(rng, grid, scale=1.0):
    return EdgeField(scale * rng.standard_normal(grid.shape),
                     scale * rng.standard_normal(grid.shape))


def small_grid(n=4, m=None, lx=1.0, ly=1.0):
    return GridSpec(n, m or n, lx, ly)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
