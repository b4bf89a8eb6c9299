"""Brute-force ground truth: spins, even subgraphs, path sums and currents.

Nothing here touches the Kac-Ward matrix; every quantity is an explicit
finite sum over configurations.
"""

from __future__ import annotations

from dataclasses import dataclass
from dataclasses import field as dc_field

import numpy as np

from .graph import EmbeddedGraph, turning_angle

MAX_SUBGRAPH_EDGES = 24
MAX_SPIN_VERTICES = 22
MAX_OBSERVABLE_EDGES = 14
MAX_CURRENT_EDGES = 16
MAX_SWITCHING_EDGES = 10
CHUNK = 1 << 18


class OracleLimitError(ValueError):
    """Raised when a graph is too large for exhaustive enumeration."""


@dataclass(frozen=True)
class SmallGraph:
    """A drawn graph with undirected weights and an optional boundary field.

    ``x`` holds one weight per undirected edge (for subgraph sums),
    ``J`` one coupling per edge (for spin sums) and ``field`` the plus
    boundary field per vertex.  ``labels`` maps local vertex indices back
    to the pattern they came from.
    """

    graph: EmbeddedGraph
    x: np.ndarray | None = None
    J: np.ndarray | None = None
    field: np.ndarray | None = None
    labels: np.ndarray | None = None
    crossings: tuple = dc_field(init=False, repr=False)

    def __post_init__(self):
        object.__setattr__(self, "crossings", tuple(self.graph.crossing_pairs()))

    @classmethod
    def from_edges(cls, positions, edges, x=None, J=None, field=None):
        return cls(EmbeddedGraph(np.asarray(positions, dtype=complex), np.asarray(edges)),
                   None if x is None else np.asarray(x, float),
                   None if J is None else np.asarray(J, float),
                   None if field is None else np.asarray(field, float))

    @classmethod
    def from_pattern(cls, pattern, vertices=None, J=None):
        """Induced subgraph of a pattern on ``vertices`` (all by default).

        The plus field of a vertex is the total coupling of its pattern
        edges leaving the vertex set.
        """
        from .weights import critical_couplings
        Jall = critical_couplings(pattern) if J is None else np.asarray(J, float)
        n = pattern.n_vertices
        if vertices is None:
            vertices = np.arange(n)
        vertices = np.asarray(sorted(set(int(v) for v in vertices)))
        local = -np.ones(n, dtype=np.int64)
        local[vertices] = np.arange(len(vertices))
        E = np.asarray(pattern.edges)
        inside = (local[E[:, 0]] >= 0) & (local[E[:, 1]] >= 0)
        edges = local[E[inside]]
        fld = np.zeros(len(vertices))
        for end, other in ((0, 1), (1, 0)):
            leaving = (local[E[:, end]] >= 0) & (local[E[:, other]] < 0)
            np.add.at(fld, local[E[leaving, end]], Jall[leaving])
        g = EmbeddedGraph(np.asarray(pattern.centers)[vertices], edges.reshape(-1, 2))
        return cls(g, None, Jall[inside], fld, vertices)

    @property
    def n_vertices(self) -> int:
        return self.graph.n_vertices

    @property
    def n_edges(self) -> int:
        return self.graph.n_edges

    def with_beta(self, beta: float) -> "SmallGraph":
        """Same graph with subgraph weights x = tanh(beta J)."""
        return SmallGraph(self.graph, np.tanh(beta * self.J), self.J, self.field, self.labels)


def _as_small(graph) -> SmallGraph:
    if isinstance(graph, SmallGraph):
        return graph
    if isinstance(graph, EmbeddedGraph):
        return SmallGraph(graph)
    return SmallGraph.from_pattern(graph)


# -- subset enumeration ------------------------------------------------------

def _incidence_masks(graph: EmbeddedGraph, edge_ids) -> np.ndarray:
    inc = np.zeros(graph.n_vertices, dtype=np.uint64)
    for bit, k in enumerate(edge_ids):
        a, b = graph.edges[k]
        inc[a] |= np.uint64(1 << bit)
        inc[b] |= np.uint64(1 << bit)
    return inc


def subsets_with_boundary(graph: EmbeddedGraph, sources=(), edge_ids=None,
                          limit: int = MAX_SUBGRAPH_EDGES) -> np.ndarray:
    """Bit masks (over ``edge_ids``) of edge sets whose odd-degree vertices are ``sources``.

    Sources are taken with multiplicity mod 2, so ``(u, u)`` is no source.
    """
    edge_ids = np.arange(graph.n_edges) if edge_ids is None else np.asarray(edge_ids)
    m = len(edge_ids)
    if m > limit:
        raise OracleLimitError(f"{m} edges exceeds the enumeration limit {limit}")
    target = np.zeros(graph.n_vertices, dtype=np.uint8)
    for s in sources:
        target[int(s)] ^= 1
    inc = _incidence_masks(graph, edge_ids)
    active = np.flatnonzero(inc)
    if np.any(target[inc == 0]):
        return np.zeros(0, dtype=np.uint64)
    out = []
    total = 1 << m
    for start in range(0, total, CHUNK):
        masks = np.arange(start, min(total, start + CHUNK), dtype=np.uint64)
        keep = np.ones(len(masks), dtype=bool)
        for v in active:
            par = np.bitwise_count(masks & inc[v]) & 1
            keep &= par == target[v]
        out.append(masks[keep])
    return np.concatenate(out)


def _bits(masks: np.ndarray, m: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(m, dtype=np.uint64)[None, :]) & np.uint64(1)).astype(bool)


def _mask_weights(masks, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if len(masks) == 0:
        return np.zeros(0)
    b = _bits(masks, len(x))
    return np.prod(np.where(b, x[None, :], 1.0), axis=1)


def _crossing_signs(masks, crossings) -> np.ndarray:
    par = np.zeros(len(masks), dtype=np.uint64)
    for i, j in crossings:
        par ^= (masks >> np.uint64(i)) & (masks >> np.uint64(j)) & np.uint64(1)
    return 1.0 - 2.0 * par.astype(float)


def _weights_of(sg: SmallGraph, x):
    x = sg.x if x is None else x
    if x is None:
        raise ValueError("no undirected weights given")
    x = np.asarray(x, dtype=float)
    if x.shape != (sg.n_edges,):
        raise ValueError(f"expected {sg.n_edges} weights, got {x.shape}")
    return x


def even_subgraph_partition(graph, x=None) -> float:
    """Signed even-subgraph sum, each set weighted by (-1)^(crossing pairs) times its weight product."""
    sg = _as_small(graph)
    x = _weights_of(sg, x)
    masks = subsets_with_boundary(sg.graph)
    return float(np.sum(_crossing_signs(masks, sg.crossings) * _mask_weights(masks, x)))


def sourced_subgraph_sum(graph, u: int, v: int, x=None) -> float:
    """Sum of weights of edge sets whose odd vertices are exactly u and v."""
    sg = _as_small(graph)
    x = _weights_of(sg, x)
    masks = subsets_with_boundary(sg.graph, (u, v))
    return float(np.sum(_crossing_signs(masks, sg.crossings) * _mask_weights(masks, x)))


def two_point_hte(graph, u: int, v: int, x=None) -> float:
    """High-temperature two-point function: sourced sum over the even sum."""
    if u == v:
        return 1.0
    return sourced_subgraph_sum(graph, u, v, x) / even_subgraph_partition(graph, x)


# -- spins -------------------------------------------------------------------

@dataclass(frozen=True)
class SpinSums:
    """Exact one- and two-point functions of an Ising measure."""

    log_z: float
    magnetization: np.ndarray
    correlations: np.ndarray
    boundary: str
    beta: float

    def two_point(self, u: int, v: int) -> float:
        return float(self.correlations[u, v])


def spin_enumeration(graph, J=None, beta: float = 1.0, boundary: str = "free",
                     field=None) -> SpinSums:
    """Exact Boltzmann sums over all spin configurations.

    With ``boundary="plus"`` each vertex feels the field ``beta * field_v``
    (the couplings to a frozen plus exterior).
    """
    sg = _as_small(graph)
    g = sg.graph
    n = g.n_vertices
    if n > MAX_SPIN_VERTICES:
        raise OracleLimitError(f"{n} vertices exceeds the spin limit {MAX_SPIN_VERTICES}")
    if boundary not in ("free", "plus"):
        raise ValueError(f"unknown boundary condition {boundary!r}")
    J = np.asarray(sg.J if J is None else J, dtype=float)
    h = np.zeros(n)
    if boundary == "plus":
        h = np.asarray(sg.field if field is None else field, dtype=float)
    a, b = g.edges[:, 0], g.edges[:, 1]
    shift = beta * (np.abs(J).sum() + np.abs(h).sum())
    total = 1 << n
    z = 0.0
    m1 = np.zeros(n)
    m2 = np.zeros((n, n))
    shifts = np.arange(n, dtype=np.int64)
    for start in range(0, total, CHUNK):
        idx = np.arange(start, min(total, start + CHUNK), dtype=np.int64)
        s = 1.0 - 2.0 * ((idx[:, None] >> shifts[None, :]) & 1)
        energy = (s[:, a] * s[:, b]) @ J + s @ h
        w = np.exp(beta * energy - shift)
        z += w.sum()
        m1 += w @ s
        m2 += (s * w[:, None]).T @ s
    return SpinSums(float(np.log(z) + shift), m1 / z, m2 / z, boundary, float(beta))


# -- fermionic observable ----------------------------------------------------

def _leftmost_trail(g: EmbeddedGraph, start_dir, first_vertex, used_edges, end_vertex, end_dir):
    """Total turning of the left-most trail through ``used_edges``.

    The walk enters ``first_vertex`` along ``start_dir``; at every vertex
    the unused edge (or the terminal half-edge at ``end_vertex``) with the
    largest turning angle is taken.
    """
    remaining = set(int(k) for k in used_edges)
    here, d_in, alpha = first_vertex, start_dir, 0.0
    terminal_open = True
    for _ in range(len(remaining) + 2):
        cands = []
        for k in g.out_edges[here]:
            if g.undirected[k] in remaining:
                cands.append((turning_angle(d_in, g.direction(k)), int(k)))
        if terminal_open and here == end_vertex:
            cands.append((turning_angle(d_in, end_dir), -1))
        if not cands:
            raise RuntimeError("left-most trail got stuck")
        ang, k = max(cands)
        alpha += ang
        if k == -1:
            return alpha, remaining
        remaining.discard(int(g.undirected[k]))
        d_in = g.direction(k)
        here = int(g.head[k])
    raise RuntimeError("left-most trail did not terminate")


def fermionic_observable_direct(graph, x_dir, e: int, g_: int, *, half_weights: str = "transition",
                                z: float | None = None) -> complex:
    """Direct path-sum observable entry for directed edges ``e`` and ``g_``.

    Configurations are edge sets of the graph with ``e`` and ``g_`` cut to
    their head and tail halves respectively; every original vertex has even
    degree.  Each contributes exp(-i/2 alpha) times its weight, with alpha
    the total turning of its left-most trail.  ``half_weights`` selects the
    half-edge weights: ``"transition"`` uses (x_{-e}, x_g), matching the
    entries of the transition matrix; ``"literal"`` uses (x_e, x_{-g}).
    """
    sg = _as_small(graph)
    gr = sg.graph
    x_dir = np.asarray(x_dir, dtype=float)
    if gr.n_edges > MAX_OBSERVABLE_EDGES:
        raise OracleLimitError(f"{gr.n_edges} edges exceeds the observable limit")
    if g_ == gr.reverse[e]:
        return 0j
    x_und = x_dir[gr.forward] * x_dir[gr.reverse[gr.forward]]
    x_und = x_und[np.argsort(gr.undirected[gr.forward])]
    if z is None:
        z = even_subgraph_partition(sg, x_und)
    if half_weights == "transition":
        hw = x_dir[gr.reverse[e]] * x_dir[g_]
    elif half_weights == "literal":
        hw = x_dir[e] * x_dir[gr.reverse[g_]]
    else:
        raise ValueError(half_weights)
    cut = {int(gr.undirected[e]), int(gr.undirected[g_])}
    rest = np.array([k for k in range(gr.n_edges) if k not in cut], dtype=np.int64)
    masks = subsets_with_boundary(gr, (gr.head[e], gr.tail[g_]), rest)
    total = 0j
    d_e, d_g = gr.direction(e), gr.direction(g_)
    for mask in masks.tolist():
        chosen = [int(rest[i]) for i in range(len(rest)) if (mask >> i) & 1]
        alpha, _ = _leftmost_trail(gr, d_e, int(gr.head[e]), chosen, int(gr.tail[g_]), d_g)
        w = hw * np.prod(x_und[chosen]) if chosen else hw
        total += np.exp(-0.5j * alpha) * w
    return (1.0 if e == g_ else 0.0) + total / z


def fermionic_observable_matrix(graph, x_dir, half_weights: str = "transition") -> np.ndarray:
    sg = _as_small(graph)
    gr = sg.graph
    x_dir = np.asarray(x_dir, dtype=float)
    x_und = x_dir[gr.forward] * x_dir[gr.reverse[gr.forward]]
    x_und = x_und[np.argsort(gr.undirected[gr.forward])]
    z = even_subgraph_partition(sg, x_und)
    n = gr.n_directed
    F = np.zeros((n, n), dtype=complex)
    for e in range(n):
        for g_ in range(n):
            F[e, g_] = fermionic_observable_direct(sg, x_dir, e, g_, half_weights=half_weights, z=z)
    return F


# -- random currents ---------------------------------------------------------

@dataclass(frozen=True)
class CurrentEnsemble:
    """Per-edge parity channel weights of currents with parameters K = beta J."""

    K: np.ndarray

    @property
    def even(self) -> np.ndarray:
        return np.cosh(self.K)

    @property
    def odd(self) -> np.ndarray:
        return np.sinh(self.K)

    def pair_channels(self) -> np.ndarray:
        """Weights of two superposed currents per (parity1, parity2), occupied edges only.

        Shape (m, 2, 2).  An edge empty in both currents has weight 1 and is
        excluded from the even-even entry.
        """
        c, s = self.even, self.odd
        out = np.empty((len(self.K), 2, 2))
        # cosh^2 - 1 without cancellation at small K
        out[:, 0, 0] = 2 * np.sinh(self.K / 2) ** 2 * (c + 1.0)
        out[:, 0, 1] = c * s
        out[:, 1, 0] = s * c
        out[:, 1, 1] = s * s
        return out


def _parity_count(sources) -> int:
    par = {}
    for s in sources:
        par[int(s)] = par.get(int(s), 0) ^ 1
    return sum(par.values())


def current_source_sum(graph, K, sources=()) -> float:
    """Exact sum of current weights over currents with the given source set."""
    sg = _as_small(graph)
    K = np.asarray(K, dtype=float)
    if sg.n_edges > MAX_CURRENT_EDGES:
        raise OracleLimitError(f"{sg.n_edges} edges exceeds the current limit")
    if _parity_count(sources) % 2:
        return 0.0
    masks = subsets_with_boundary(sg.graph, sources)
    if len(masks) == 0:
        return 0.0
    b = _bits(masks, sg.n_edges)
    return float(np.sum(np.prod(np.where(b, np.sinh(K), np.cosh(K)), axis=1)))


def current_two_point(graph, K, u: int, v: int) -> float:
    if u == v:
        return 1.0
    return current_source_sum(graph, K, (u, v)) / current_source_sum(graph, K, ())


def _connected(edges, mask: int, u: int, v: int, n: int) -> bool:
    if u == v:
        return True
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i, (a, b) in enumerate(edges):
        if (mask >> i) & 1:
            parent[find(a)] = find(b)
    return find(u) == find(v)


@dataclass(frozen=True)
class SwitchingResult:
    lhs: float
    rhs: float

    @property
    def rel_error(self) -> float:
        scale = max(abs(self.lhs), abs(self.rhs))
        return 0.0 if scale == 0 else abs(self.lhs - self.rhs) / scale


def switching_lemma_check(graph, K, A, u: int, v: int) -> SwitchingResult:
    """Both sides of the switching identity for source set ``A`` and pair (u, v).

    Left: sum over n1 with sources A ^ {u,v} and n2 with sources {u,v}.
    Right: sum over n1 with sources A and sourceless n2 such that u and v
    are joined by edges occupied in n1 + n2.
    """
    sg = _as_small(graph)
    K = np.asarray(K, dtype=float)
    m = sg.n_edges
    if m > MAX_SWITCHING_EDGES:
        raise OracleLimitError(f"{m} edges exceeds the switching limit")
    A = tuple(int(a) for a in A)
    lhs = current_source_sum(sg, K, A + (u, v)) * current_source_sum(sg, K, (u, v))
    if _parity_count(A) % 2:
        return SwitchingResult(lhs, 0.0)
    P1 = subsets_with_boundary(sg.graph, A).astype(np.int64)
    P2 = subsets_with_boundary(sg.graph, ()).astype(np.int64)
    ch = CurrentEnsemble(K).pair_channels()
    b1 = _bits(P1.astype(np.uint64), m).astype(np.int64)
    b2 = _bits(P2.astype(np.uint64), m).astype(np.int64)
    edges = sg.graph.edges.tolist()
    rhs = 0.0
    for occ in range(1 << m):
        if not _connected(edges, occ, u, v, sg.n_vertices):
            continue
        i1 = np.flatnonzero((P1 & ~occ) == 0)
        i2 = np.flatnonzero((P2 & ~occ) == 0)
        if len(i1) == 0 or len(i2) == 0:
            continue
        w = np.ones((len(i1), len(i2)))
        for k in range(m):
            if (occ >> k) & 1:
                w *= ch[k][b1[i1, k][:, None], b2[i2, k][None, :]]
        rhs += w.sum()
    return SwitchingResult(float(lhs), float(rhs))
