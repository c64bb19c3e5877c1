import itertools

import numpy as np
import pytest

from maxbisect.config_space import Configuration
from maxbisect.pipeline import Graph
from maxbisect.rounding import BoostFunction

PHI1 = Configuration(0.176945, 0.176945, -0.646110)
PHI2 = Configuration(1.0, -1.0, -1.0)
PAIRING_F = BoostFunction(0.478, 1.618)


def cycle(n, pad=False):
    edges = [(i, (i + 1) % n, 1.0) for i in range(n)]
    # odd cycles get an isolated vertex so that a bisection exists
    return Graph(n + (1 if pad else 0), tuple(edges))


def complete(n):
    return Graph(n, tuple((i, j, 1.0) for i, j in itertools.combinations(range(n), 2)))


def complete_bipartite(a, b):
    return Graph(a + b, tuple((i, a + j, 1.0) for i in range(a) for j in range(b)))


def gnp(n, seed, weighted=False):
    rng = np.random.default_rng(seed)
    edges = []
    for i, j in itertools.combinations(range(n), 2):
        if rng.random() < 0.5:
            w = float(np.round(rng.uniform(0.5, 2.0), 3)) if weighted else 1.0
            edges.append((i, j, w))
    return Graph(n, tuple(edges))


def weighted_cycle(n, seed):
    rng = np.random.default_rng(seed)
    return Graph(n, tuple((i, (i + 1) % n, float(np.round(rng.uniform(0.5, 2.0), 3))) for i in range(n)))


def corpus():
    """Twenty (name, graph) pairs used by the pipeline checks."""
    out = []
    for n in range(4, 13):
        out.append((f"C{n}", cycle(n, pad=bool(n % 2))))
    out += [("K4", complete(4)), ("K6", complete(6)),
            ("K33", complete_bipartite(3, 3)), ("K44", complete_bipartite(4, 4))]
    for n in (8, 10, 12, 14):
        out.append((f"G{n}", gnp(n, seed=n)))
    out += [("G10w", gnp(10, seed=110, weighted=True)), ("C8w", weighted_cycle(8, seed=8))]
    out.append(("K3+1", Graph(4, ((0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)))))
    return out


def random_configurations(rng, n, delta=0.0):
    """Uniform samples from the polytope (rejection from the cube)."""
    pts = []
    while sum(len(p) for p in pts) < n:
        x = rng.uniform(-1 + delta, 1 - delta, size=(4 * n, 3))
        m1, m2, r = x.T
        ok = ((m1 + m2 + r >= -1) & (m1 - m2 - r >= -1) & (-m1 + m2 - r >= -1) & (-m1 - m2 + r >= -1))
        pts.append(x[ok])
    return np.concatenate(pts)[:n]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
