import math

import pytest
from hypothesis import HealthCheck, settings

from plmecho.ensemble import SpatialGrid, build_spectral_grid, init_state

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def record_criterion(number: int, title: str, passed: bool, detail: str = "") -> None:
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


@pytest.fixture(scope="session")
def small_spectral():
    return build_spectral_grid("rectangular", 2 * math.pi * 1e6, 41)


@pytest.fixture
def fresh_state(small_spectral):
    return init_state(small_spectral, SpatialGrid(0.01, 4))
