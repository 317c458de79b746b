import numpy as np
import pytest

from chebdist.graph import (
    WeightedGraph,
    density_matched_sigma,
    sample_connected_geometric_graph,
)


def random_graph(rng, n, kappa=0.6):
    """Connected geometric graph with the neighbor density of the 500-sensor setup."""
    g, _ = sample_connected_geometric_graph(n, density_matched_sigma(n), kappa, rng)
    return g


def path_graph(n, weight=1.0):
    return WeightedGraph(n, [(i, i + 1, weight) for i in range(n - 1)])


def complete_graph(n, weight=1.0):
    return WeightedGraph(n, [(i, j, weight) for i in range(n) for j in range(i + 1, n)])


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def p3():
    return path_graph(3)
