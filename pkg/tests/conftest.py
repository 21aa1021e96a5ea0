"""Shared fixtures and the acceptance-line reporter.

The acceptance tests record one pass/fail line each; a terminal-summary hook
prints them after every run so the outcome of each criterion is always
visible, even for passing tests whose stdout pytest captures.
"""

import numpy as np
import pytest

from walshlab import Filtration, GridFunction, Martingale

ACCEPTANCE_LINES = []


def record_acceptance(line):
    ACCEPTANCE_LINES.append(line)
    print(line, flush=True)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def random_grid(resolution, seed, low=-1.0, high=1.0):
    rng = np.random.default_rng(seed)
    return GridFunction(resolution, rng.uniform(low, high, 1 << resolution))


def random_martingale(resolution, seed):
    return Martingale(Filtration.dyadic(resolution), random_grid(resolution, seed))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
