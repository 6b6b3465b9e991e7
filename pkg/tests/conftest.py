import os
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from yoccoz.kneading import fibonacci_parameter
from yoccoz.poly import Polynomial
from yoccoz.puzzle import YoccozPuzzle

settings.register_profile("ci", max_examples=20, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "ci"))

GOLDEN = Path(__file__).parent / "golden"
AIRPLANE = "-1.7548776662466927"
FIB_BITS = 3000
FIB_HORIZON = 20000


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one line per acceptance criterion for the terminal summary."""
    def record(n, passed, detail):
        _ACCEPTANCE[n] = f"criterion {n:2d}: {'PASS' if passed else 'FAIL'} | {detail}"
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])


@pytest.fixture(scope="session")
def golden():
    return GOLDEN


@pytest.fixture(scope="session")
def fib_c():
    return fibonacci_parameter(FIB_BITS)


@pytest.fixture(scope="session")
def fib_puzzle(fib_c):
    return YoccozPuzzle(n_pc=FIB_HORIZON, horizon=FIB_HORIZON).fit(Polynomial.quadratic(fib_c))


@pytest.fixture(scope="session")
def airplane_puzzle():
    return YoccozPuzzle(horizon=3000).fit(Polynomial.quadratic(AIRPLANE))


@pytest.fixture(scope="session")
def fib_nest(fib_puzzle):
    from yoccoz.nest import build_nest

    return build_nest(fib_puzzle, levels=5)
