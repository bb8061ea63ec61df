import numpy as np
import pytest

from sievebfs.graphgen import EdgeList, build_csr

# Rows of the pre-transposed adjacency matrix of the 8-vertex example graph.
EXAMPLE_ROWS = [
    [2, 3, 5],
    [6, 7],
    [0, 4],
    [0, 5, 6],
    [2, 7],
    [0, 3, 7],
    [1, 3],
    [1, 4, 5],
]


@pytest.fixture
def example_edges():
    pairs = [(r, c) for r, cols in enumerate(EXAMPLE_ROWS) for c in cols if r < c]
    return EdgeList(8, np.array(pairs, dtype=np.uint64))


@pytest.fixture
def example_csr(example_edges):
    return build_csr(example_edges)



# --- acceptance summary ------------------------------------------------------

_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance():
    """Record one verdict line per acceptance criterion; printed in the summary."""

    def record(number, ok, detail):
        _ACCEPTANCE_LINES.append((number, f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"))
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
