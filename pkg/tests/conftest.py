import json
import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ptqm import EpsilonFamily, Matrix2x2, ShiftedSquare, solve_model

GOLDEN = Path(__file__).parent / "golden"

settings.register_profile(
    "default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


@pytest.fixture(scope="session")
def oracles():
    return json.loads((GOLDEN / "oracles.json").read_text())


@pytest.fixture(scope="session")
def sol_2x2():
    return solve_model(Matrix2x2(1.0, 1.0, math.pi / 6))


@pytest.fixture(scope="session")
def frame_2x2(sol_2x2):
    return sol_2x2.frame()


@pytest.fixture(scope="session")
def sol_eps0():
    return solve_model(EpsilonFamily(0.0))


@pytest.fixture(scope="session")
def sol_eps05():
    return solve_model(EpsilonFamily(0.5))


@pytest.fixture(scope="session")
def sol_eps1():
    return solve_model(EpsilonFamily(1.0))


@pytest.fixture(scope="session")
def frame_eps0(sol_eps0):
    return sol_eps0.frame()


@pytest.fixture(scope="session")
def frame_eps05(sol_eps05):
    return sol_eps05.frame()


@pytest.fixture(scope="session")
def frame_eps1(sol_eps1):
    return sol_eps1.frame()


@pytest.fixture(scope="session")
def sol_shifted():
    return solve_model(ShiftedSquare())


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


@pytest.fixture
def criterion_line():
    """Record the one-line PASS/FAIL summary of an acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append((number, line))
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
