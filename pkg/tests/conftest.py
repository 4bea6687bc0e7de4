import numpy as np
import pytest

from pmrouter.optics import build_router

# acceptance outcomes: (number, title, passed, detail), printed after the run
ACCEPTANCE = []


def record(number, title, passed, detail):
    ACCEPTANCE.append((number, title, bool(passed), detail))
    print(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE, key=lambda x: x[0]):
        terminalreporter.write_line(f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} | {detail}")


@pytest.fixture(scope="session")
def router():
    return build_router()


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
