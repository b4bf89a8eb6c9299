import functools

import numpy as np
import pytest
from scipy.spatial import Delaunay

from pattern_ising.oracle import SmallGraph
from pattern_ising.pattern import (generate_acute_triangulation, generate_isoradial_square,
                                   generate_stretched_square)


def random_planar_graph(seed: int, max_edges: int = 16, n_points: int = 8) -> SmallGraph:
    """Delaunay triangulation of random points with edges dropped down to ``max_edges``."""
    rng = np.random.default_rng(seed)
    pts = rng.uniform(0, 1, (n_points, 2))
    tri = Delaunay(pts)
    edges = set()
    for s in tri.simplices:
        for i in range(3):
            a, b = sorted((int(s[i]), int(s[(i + 1) % 3])))
            edges.add((a, b))
    edges = sorted(edges)
    keep = rng.permutation(len(edges))[:max_edges]
    edges = [edges[k] for k in sorted(keep)]
    return SmallGraph.from_edges(pts[:, 0] + 1j * pts[:, 1], edges)


def random_directed_weights(graph, seed: int, lo: float = 0.1, hi: float = 1.2) -> np.ndarray:
    return np.random.default_rng(seed + 10_000).uniform(lo, hi, graph.n_directed)


@functools.lru_cache(maxsize=None)
def iso(n: int, m: int | None = None):
    return generate_isoradial_square(n, n if m is None else m)


@functools.lru_cache(maxsize=None)
def stretched(heights: tuple, rows: int | None = None):
    return generate_stretched_square(list(heights), rows)


@functools.lru_cache(maxsize=None)
def triangulation(seed: int, width: int = 3, height: int = 3):
    return generate_acute_triangulation(seed, width, height)


@pytest.fixture
def sq3():
    return iso(3)


@pytest.fixture
def sq4():
    return iso(4)


@pytest.fixture
def st4():
    return stretched((1.0, 1.6, 0.8, 1.3), 4)


@pytest.fixture
def tri3():
    return triangulation(3)
