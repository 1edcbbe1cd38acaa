import numpy as np
import pytest

from qtraj import fields


@pytest.fixture
def grid2d():
    return fields.grid((64, 64), (64.0, 64.0), origin=(-32.0, -32.0))


@pytest.fixture
def grid1d():
    return fields.grid(256, 128.0, origin=-64.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    """Store and print one pass/fail line for an acceptance criterion."""
    line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES[number] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES, key=str):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
