import numpy as np
import pytest

from tinygroups import inputgraph
from tinygroups.idring import RingSet
from tinygroups.seeding import stream


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_graph(n, seed=0):
    return inputgraph.build(RingSet.random(n, stream(seed, "test-ring")))


@pytest.fixture(scope="session")
def graph256():
    return random_graph(256)


# one pass/fail line per acceptance criterion, printed after the run
ACCEPTANCE = {}


def report(criterion, ok, detail):
    line = f"criterion {criterion:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    ACCEPTANCE[criterion] = line
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.write_sep("=", "acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
