import itertools

import numpy as np
import pytest

from balcut import Graph


def random_connected_graph(n, seed, p=0.4, wmin=0.1, wmax=2.0):
    """Erdős–Rényi graph with uniform weights, redrawn until connected."""
    rng = np.random.default_rng(seed)
    while True:
        edges = [(i, j, float(rng.uniform(wmin, wmax)))
                 for i, j in itertools.combinations(range(n), 2) if rng.random() < p]
        if not edges:
            continue
        g = Graph.from_edges(n, edges)
        if g.n_components() == 1:
            return g


def path_graph(n):
    return Graph.from_edges(n, [(i, i + 1, 1.0) for i in range(n - 1)])


def all_masks(n):
    """Every nonempty proper subset of ``range(n)`` as a boolean mask."""
    for code in range(1, 2 ** n - 1):
        yield np.array([(code >> i) & 1 for i in range(n)], dtype=bool)


@pytest.fixture
def p2():
    return path_graph(2)


@pytest.fixture
def p3():
    return path_graph(3)


@pytest.fixture
def p4():
    return path_graph(4)


@pytest.fixture
def k3():
    return Graph.from_edges(3, [(0, 1, 1.0), (0, 2, 1.0), (1, 2, 1.0)])


# one summary line per acceptance criterion, filled in by test_acceptance
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
