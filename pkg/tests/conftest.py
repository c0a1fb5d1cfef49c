import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nonlocal_skt import kernels as K
from nonlocal_skt.grid import PeriodicGrid1D
from nonlocal_skt.scheme import make_params

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def report(number: int, title: str, passed: bool, detail: str = "") -> None:
    line = f"criterion {number:2d} [{'PASS' if passed else 'FAIL'}] {title}"
    if detail:
        line += f" :: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_params():
    grid = PeriodicGrid1D(16, 25.0)
    rho = K.discretize(K.SmoothCos(), grid)
    return make_params(grid, K.discretize(K.Dirac(), grid), rho1=rho, d1=0.1, d2=0.1, d12=1.0, d21=2.0)
