import numpy as np
import pytest

from aggdyn.fixtures import load_fixture


@pytest.fixture(scope="session")
def g1():
    return load_fixture("G1")


@pytest.fixture(scope="session")
def g2():
    return load_fixture("G2")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}")
