import numpy as np
import pytest

from digcl import Digraph


def random_digraph(rng: np.random.Generator, n: int, p: float, min_edges: int = 1) -> Digraph:
    """Directed G(n, p) without self-loops, resampled until it has at
    least ``min_edges`` edges."""
    while True:
        mask = rng.random((n, n)) < p
        np.fill_diagonal(mask, False)
        edges = list(zip(*np.nonzero(mask)))
        if len(edges) >= min_edges:
            return Digraph(n, [(int(u), int(v)) for u, v in edges])


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
