import numpy as np
import pytest
from hypothesis import settings

from analogical_rl.relational import Kind, structure_from_cells
from analogical_rl.solver import solve
from analogical_rl.tictactoe import parse_cells

settings.register_profile("default", deadline=None, max_examples=200)
settings.load_profile("default")


def cells(text):
    """Relative cells from text; rows may be separated with '/'."""
    return parse_cells(text)


def state(text):
    return structure_from_cells(cells(text), Kind.STATE)


def schema(text):
    return structure_from_cells(cells(text), Kind.SCHEMA)


@pytest.fixture(scope="session")
def table():
    return solve()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def acceptance_report():
    def record(number, title, ok, detail=""):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title}"
        ACCEPTANCE_LINES.append(line + (f" ({detail})" if detail else ""))
        print(ACCEPTANCE_LINES[-1])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
