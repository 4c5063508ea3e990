import math

import numpy as np
import pytest

from eigenfamilies.manifolds import Lattice, flat_torus, weighted_sasakian

FOUR_PI2 = 4 * math.pi**2

_criteria = []


@pytest.fixture(scope="session")
def square():
    lattice = Lattice(np.eye(2))
    return lattice, flat_torus(lattice)


@pytest.fixture(scope="session")
def sasakian12():
    return weighted_sasakian(2, (1, 2))


@pytest.fixture(scope="session")
def round_s3():
    return weighted_sasakian(2, (1, 1))


@pytest.fixture
def criterion():
    """Record one acceptance line; printed in the terminal summary."""

    def record(tag, ok, detail=""):
        _criteria.append((tag, bool(ok), detail))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for tag, ok, detail in _criteria:
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {tag}: {detail}")
