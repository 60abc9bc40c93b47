import numpy as np
import pytest

from choice_rank.verify import COUNTEREXAMPLE

# fixed seeds for every statistical test; margins are 4 standard errors
SEEDS = (20240501, 7, 1234)


@pytest.fixture
def rng():
    return np.random.default_rng(SEEDS[0])


@pytest.fixture
def counterexample():
    return COUNTEREXAMPLE.copy()


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
