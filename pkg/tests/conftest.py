import pytest

from parabinv.signal import TimeGrid, builtin_signal
from parabinv.symbolkit import CoefficientSet

_ACCEPTANCE_LINES = []


def record_acceptance(line: str) -> None:
    print(line)
    _ACCEPTANCE_LINES.append(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def small_grid():
    return TimeGrid(0.01, 2048)


@pytest.fixture
def exp_sin(small_grid):
    return builtin_signal("exp-sin", small_grid)


@pytest.fixture
def unit_coeffs():
    return CoefficientSet(1.0, 1.0, 1.0, 1.0, 0.0)
