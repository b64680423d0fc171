import numpy as np
import pytest

from asymfilter.sde import ModelParams, TimeGrid

CUBIC = ModelParams(a=-0.4, b=0.5, c=1.0, sigma=0.3, epsilon=0.2, j=3)
LINEAR = ModelParams(a=-0.4, b=0.5, c=1.0, sigma=0.3, epsilon=0.2, j=1)

# one line per acceptance criterion, printed at the end of the run
CRITERIA_REPORT: list = []


def record(criterion: str, ok: bool, detail: str) -> None:
    CRITERIA_REPORT.append((criterion, ok, detail))


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA_REPORT:
        return
    terminalreporter.section("acceptance criteria")
    for name, ok, detail in sorted(CRITERIA_REPORT):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")


@pytest.fixture
def cubic():
    return CUBIC


@pytest.fixture
def linear():
    return LINEAR


@pytest.fixture
def short_grid():
    return TimeGrid(5.0, 0.01)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
