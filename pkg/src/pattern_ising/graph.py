"""Plane-embedded graphs with a canonical directed-edge index.

Vertices are complex numbers.  Every undirected edge ``k = (a, b)`` gives two
directed edges; directed edges are ordered by (tail index, direction angle),
which makes matrices built on top of the index reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def turning_angle(d_from, d_to):
    """Principal turning angle in (-pi, pi] from direction ``d_from`` to ``d_to``.

    Directions are complex numbers (e.g. ``head - tail``).  A reversal maps to
    exactly ``pi``.  Works elementwise on arrays.
    """
    d_from = np.asarray(d_from, dtype=complex)
    d_to = np.asarray(d_to, dtype=complex)
    if np.any(d_from == 0) or np.any(d_to == 0):
        raise ValueError("zero-length edge has no direction")
    ratio = d_to / d_from
    ang = np.angle(ratio)
    # np.angle(-1 - 0j) is -pi; fold it onto the principal branch.
    ang = np.where(ang <= -np.pi, np.pi, ang)
    if ang.ndim == 0:
        return float(ang)
    return ang


@dataclass(frozen=True)
class EmbeddedGraph:
    """A finite graph drawn in the plane with straight edges.

    ``positions`` holds one complex coordinate per vertex and ``edges`` one
    ``(a, b)`` pair per undirected edge.  The directed-edge arrays are filled
    in on construction.
    """

    positions: np.ndarray
    edges: np.ndarray
    tail: np.ndarray = field(init=False, repr=False)
    head: np.ndarray = field(init=False, repr=False)
    undirected: np.ndarray = field(init=False, repr=False)
    reverse: np.ndarray = field(init=False, repr=False)
    forward: np.ndarray = field(init=False, repr=False)
    out_edges: tuple = field(init=False, repr=False)
    in_edges: tuple = field(init=False, repr=False)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=complex).reshape(-1)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        n = len(pos)
        if edges.size and (edges.min() < 0 or edges.max() >= n):
            raise ValueError("edge endpoint out of range")
        if np.any(edges[:, 0] == edges[:, 1]):
            raise ValueError("self-loops are not allowed")
        m = len(edges)
        tails = np.concatenate([edges[:, 0], edges[:, 1]])
        heads = np.concatenate([edges[:, 1], edges[:, 0]])
        und = np.concatenate([np.arange(m), np.arange(m)])
        vec = pos[heads] - pos[tails]
        if np.any(vec == 0):
            raise ValueError("zero-length edge")
        order = np.lexsort((np.angle(vec), tails))
        rank = np.empty(2 * m, dtype=np.int64)
        rank[order] = np.arange(2 * m)
        tail = tails[order]
        head = heads[order]
        undirected = und[order]
        # raw index i and i + m are reversals of one another
        raw_rev = np.concatenate([np.arange(m, 2 * m), np.arange(m)])
        reverse = rank[raw_rev[order]]
        forward = rank[np.arange(m)]
        out_edges = tuple(np.flatnonzero(tail == v) for v in range(n))
        in_edges = tuple(reverse[o] for o in out_edges)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "tail", tail)
        object.__setattr__(self, "head", head)
        object.__setattr__(self, "undirected", undirected)
        object.__setattr__(self, "reverse", reverse)
        object.__setattr__(self, "forward", forward)
        object.__setattr__(self, "out_edges", out_edges)
        object.__setattr__(self, "in_edges", in_edges)

    @property
    def n_vertices(self) -> int:
        return len(self.positions)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def n_directed(self) -> int:
        return 2 * len(self.edges)

    def direction(self, k=None):
        """Complex direction ``head - tail`` of directed edge(s)."""
        if k is None:
            return self.positions[self.head] - self.positions[self.tail]
        return self.positions[self.head[k]] - self.positions[self.tail[k]]

    def degree(self, v: int) -> int:
        return len(self.out_edges[v])

    def neighbors(self, v: int) -> np.ndarray:
        return self.head[self.out_edges[v]]

    def directed_index(self, a: int, b: int) -> int:
        """Index of the directed edge ``a -> b``."""
        out = self.out_edges[a]
        hit = out[self.head[out] == b]
        if len(hit) == 0:
            raise KeyError(f"no edge {a} -> {b}")
        return int(hit[0])

    def adjacency(self) -> list[list[int]]:
        return [list(self.neighbors(v)) for v in range(self.n_vertices)]

    def bfs_distances(self, source: int) -> np.ndarray:
        """Graph distances from ``source``; unreachable vertices get -1."""
        dist = np.full(self.n_vertices, -1, dtype=np.int64)
        dist[source] = 0
        frontier = [source]
        while frontier:
            nxt = []
            for a in frontier:
                for b in self.neighbors(a):
                    if dist[b] < 0:
                        dist[b] = dist[a] + 1
                        nxt.append(int(b))
            frontier = nxt
        return dist

    def is_connected(self) -> bool:
        if self.n_vertices == 0:
            return True
        return bool(np.all(self.bfs_distances(0) >= 0))

    def crossing_pairs(self, eps: float = 1e-12) -> list[tuple[int, int]]:
        """Pairs of undirected edges whose segments cross at interior points."""
        e = self.edges
        if len(e) < 2:
            return []
        a = self.positions[e[:, 0]]
        b = self.positions[e[:, 1]]
        scale = np.maximum(np.abs(b - a), 1e-300)

        def orient(p, q, r):
            return ((q.real - p.real) * (r.imag - p.imag)
                    - (q.imag - p.imag) * (r.real - p.real))

        # o[i, j]: side of segment i's endpoints relative to line of segment j
        o_a = orient(a[None, :], b[None, :], a[:, None]) / scale[None, :]
        o_b = orient(a[None, :], b[None, :], b[:, None]) / scale[None, :]

        def opposite(s, t):
            return ((s > eps) & (t < -eps)) | ((s < -eps) & (t > eps))

        straddle = opposite(o_a, o_b)  # segment i straddles line j
        hit = straddle & straddle.T
        shared = ((e[:, None, 0] == e[None, :, 0]) | (e[:, None, 0] == e[None, :, 1])
                  | (e[:, None, 1] == e[None, :, 0]) | (e[:, None, 1] == e[None, :, 1]))
        hit &= ~shared
        i, j = np.nonzero(np.triu(hit, 1))
        return [(int(p), int(q)) for p, q in zip(i, j)]


def _orient(a, b, c):
    return (b.real - a.real) * (c.imag - a.imag) - (b.imag - a.imag) * (c.real - a.real)


def segments_cross(a, b, c, d, eps: float = 1e-12) -> bool:
    """Proper crossing test for segments ab and cd (touching does not count)."""
    o1 = _orient(a, b, c) / abs(b - a)
    o2 = _orient(a, b, d) / abs(b - a)
    o3 = _orient(c, d, a) / abs(d - c)
    o4 = _orient(c, d, b) / abs(d - c)

    def opposite(s, t):
        return (s > eps and t < -eps) or (s < -eps and t > eps)

    return opposite(o1, o2) and opposite(o3, o4)
