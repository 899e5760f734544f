import itertools

import numpy as np
import pytest

from voterlab import graphs


@pytest.fixture(scope="session")
def c8():
    return graphs.cycle_graph(8)


@pytest.fixture(scope="session")
def k4():
    return graphs.complete_graph(4)


def naive_conductance(g) -> float:
    """Independent brute force over all subsets, for cross-checking."""
    best = np.inf
    for r in range(1, g.n):
        for combo in itertools.combinations(range(g.n), r):
            s = set(combo)
            vol = graphs.volume(g, s)
            if 0 < vol <= g.m:
                best = min(best, graphs.cut_size(g, s) / vol)
    return best


def random_connected_graph(n: int, rng) -> "graphs.Graph":
    """Random connected simple graph: a random spanning tree plus extras."""
    order = rng.permutation(n)
    edges = set()
    for i in range(1, n):
        j = int(rng.integers(0, i))
        a, b = int(order[i]), int(order[j])
        edges.add((min(a, b), max(a, b)))
    extra = int(rng.integers(0, n))
    for _ in range(extra):
        a, b = rng.integers(0, n, size=2)
        if a != b:
            edges.add((min(int(a), int(b)), max(int(a), int(b))))
    return graphs.build_graph(sorted(edges), n)
