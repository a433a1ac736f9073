import numpy as np
import pytest

from digraphwave.graph import Graph

ACCEPTANCE_LINES = []


def random_digraph(rng, n, density, weighted=True, n_sinks=1):
    """Random directed graph with at least ``n_sinks`` nodes stripped of out-edges."""
    mask = rng.random((n, n)) < density
    np.fill_diagonal(mask, False)
    sinks = rng.choice(n, size=min(n_sinks, n), replace=False)
    mask[sinks, :] = False
    src, dst = np.nonzero(mask)
    w = rng.uniform(0.1, 3.0, size=src.size) if weighted else None
    return Graph.from_edges(src, dst, w, n=n)


def dense_laplacian(g):
    """Out-degree normalized Laplacian built entry by entry from the edge list."""
    n = g.n
    L = np.zeros((n, n))
    out = np.zeros(n)
    src, dst, w = g.edges()
    for j, wt in zip(src.tolist(), w.tolist()):
        out[j] += wt
    for j, i, wt in zip(src.tolist(), dst.tolist(), w.tolist()):
        L[i, j] -= wt / out[j]
    for j in range(n):
        if out[j] > 0:
            L[j, j] += 1.0
    return L


def dense_psi(g, tau):
    from scipy.linalg import expm

    return expm(-tau * dense_laplacian(g))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
