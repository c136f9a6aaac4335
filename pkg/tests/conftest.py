import sys
from pathlib import Path

import pytest

from shb import BACKWARD, FORWARD, Problem, integrate
from shb.ladder import extract_ladder
from shb.shooting import find_periodic

sys.path.insert(0, str(Path(__file__).parent))

FIG_IC = (0.8, 0.0, 0.0, 0.0)

# scipy DOP853 at rtol 1e-13, atol 1e-14, stopped at |w| = 1e8 (tests/oracle.py)
R_PLUS_ORACLE = 6.7051432746425315
# brentq on the DOP853 shooting function, k = 3.5 and k = 2.1
A_STAR_35 = 2.1074775234914926
M_35 = 1.2465608796736556
A_STAR_21 = 0.3769538626085756
# first critical point of V'''' + V^3 = 0 from (0, 1, 0, 0)
LIMIT_T_P3 = 2.2355756313979582


@pytest.fixture(scope="session")
def prob15():
    return Problem.prototype(1.5)


@pytest.fixture(scope="session")
def prob35():
    return Problem.prototype(3.5)


@pytest.fixture(scope="session")
def run15(prob15):
    return integrate(prob15, FIG_IC, FORWARD)


@pytest.fixture(scope="session")
def run15_back(prob15):
    return integrate(prob15, FIG_IC, BACKWARD)


@pytest.fixture(scope="session")
def ladder15(run15):
    return extract_ladder(run15)


@pytest.fixture(scope="session")
def periodic35(prob35):
    return find_periodic(prob35)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
