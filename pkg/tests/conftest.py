import numpy as np
import pytest

from clustergrape.graph import parse_graph
from clustergrape.qcore import cluster_problem
from clustergrape.reduce import reduce_problem

TABLE_GRAPHS = ["K3", "L3", "K4", "C4", "K5", "K6", "G2x3", "K7"]


@pytest.fixture(scope="session")
def problems():
    """Full global-control problems for every graph in the minimal-time table."""
    return {name: cluster_problem(parse_graph(name)) for name in TABLE_GRAPHS}


@pytest.fixture(scope="session")
def reduced(problems):
    return {name: reduce_problem(p) for name, p in problems.items()}


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


ACCEPTANCE_LINES = []


@pytest.fixture
def report():
    """Record one PASS/FAIL line for an acceptance criterion and print it."""

    def _report(criterion, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
        ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return _report


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
