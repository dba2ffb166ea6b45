import pytest

from bmtransforms.pl_path import from_knots, linear_path, zero_path

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


@pytest.fixture
def tent():
    """Knots (0,0),(1,1),(2,-1)."""
    return from_knots([(0, 0), (1, 1), (2, -1)])


@pytest.fixture
def vee():
    """Knots (0,0),(1,-1),(2,1)."""
    return from_knots([(0, 0), (1, -1), (2, 1)])


@pytest.fixture
def unit_line():
    return linear_path(1.0, 1.0)


@pytest.fixture
def zero():
    return zero_path(1.0)
