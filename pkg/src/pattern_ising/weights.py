"""Coupling constants and directed edge weights on circle patterns."""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

import numpy as np

from .graph import turning_angle
from .pattern import CirclePattern


@dataclass(frozen=True)
class WeightVector:
    """Real weights on directed edges.

    ``kind`` is ``"critical"``, ``"beta_deformed"`` or ``"signed"``; ``beta``
    is set for deformed weights.
    """

    values: np.ndarray
    kind: str = "critical"
    beta: float | None = None

    def undirected(self, graph) -> np.ndarray:
        """Factorized weights ``x_e = x_{e} * x_{-e}`` per undirected edge."""
        x = np.asarray(self.values)
        out = np.empty(graph.n_edges, dtype=x.dtype)
        out[graph.undirected[graph.forward]] = x[graph.forward] * x[graph.reverse[graph.forward]]
        return out

    def signed(self, tau) -> "WeightVector":
        return WeightVector(np.asarray(tau) * self.values, "signed", self.beta)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "beta": self.beta,
                "values": [float(v) for v in self.values]}


def critical_couplings(pattern: CirclePattern) -> np.ndarray:
    """Critical J per undirected edge from tanh J = sqrt(tan(th_uv/2) tan(th_vu/2))."""
    th = pattern.half_angles
    if np.any(th >= np.pi / 2):
        k = int(np.argmax(th))
        g = pattern.graph
        raise ValueError(f"half-angle pi/2 on edge ({g.tail[k]}, {g.head[k]}): "
                         "coupling would be infinite")
    g = pattern.graph
    t = np.tan(th / 2)
    fwd = g.forward
    prod = t[fwd] * t[g.reverse[fwd]]
    J = np.empty(pattern.n_edges)
    J[g.undirected[fwd]] = np.arctanh(np.sqrt(prod))
    return J


def critical_directed_weights(pattern: CirclePattern) -> WeightVector:
    return WeightVector(np.sqrt(np.tan(pattern.half_angles / 2)), "critical", 1.0)


def coupling_ratio(beta: float, J):
    """s(beta, J) = tanh(beta J) / tanh(J)."""
    J = np.asarray(J, dtype=float)
    return np.tanh(beta * J) / np.tanh(J)


def beta_deformed_weights(pattern: CirclePattern, beta: float) -> WeightVector:
    """Directed weights whose factorization is tanh(beta J_e).

    The geometric factor tan(theta/2) is kept per direction and the scalar
    ratio tanh(beta J)/tanh(J) is split evenly between the two directions.
    """
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    J = critical_couplings(pattern)
    s = coupling_ratio(beta, J)[pattern.graph.undirected]
    return WeightVector(np.sqrt(s * np.tan(pattern.half_angles / 2)),
                        "beta_deformed", float(beta))


def decay_constant(pattern: CirclePattern) -> float:
    """c = 2M / sinh(2M) with M the largest critical coupling."""
    M = float(critical_couplings(pattern).max())
    return 2 * M / np.sinh(2 * M)


# -- defect curves -----------------------------------------------------------

@dataclass(frozen=True)
class DefectCurve:
    """A polyline from primal vertex ``u`` to ``v`` through dual vertices.

    It leaves ``u`` towards a corner of the face around ``u``, follows chords
    (each crossing exactly its primal edge) and enters ``v`` from a corner of
    the face around ``v``.
    """

    u: int
    v: int
    corners: tuple
    crossed: tuple
    tau: np.ndarray
    start_direction: complex
    end_direction: complex
    internal_turning: float

    def fingerprint(self) -> str:
        return "-".join(str(c) for c in self.corners)


def _dual_adjacency(pattern: CirclePattern, blocked=()):
    blocked = set(int(k) for k in blocked)
    adj: dict[int, list[tuple[int, int]]] = {}
    for k, (a, b) in enumerate(pattern.chords.tolist()):
        if k in blocked:
            continue
        adj.setdefault(a, []).append((b, k))
        adj.setdefault(b, []).append((a, k))
    for lst in adj.values():
        lst.sort()
    return adj


def defect_curve(pattern: CirclePattern, u: int, v: int, start=None, end=None,
                 blocked=()) -> DefectCurve:
    """Shortest dual path between the faces around ``u`` and ``v``.

    ``start``/``end`` pin the first/last dual corner; chords listed in
    ``blocked`` (undirected edge ids) are not used, which gives alternative
    curves between the same endpoints.
    """
    if u == v:
        raise ValueError("defect curve needs distinct endpoints")
    g = pattern.graph
    if g.bfs_distances(u)[v] < 0:
        raise ValueError(f"vertices {u} and {v} are disconnected")
    sources = [int(start)] if start is not None else [int(c) for c in pattern.face_corners(u)]
    targets = {int(end)} if end is not None else {int(c) for c in pattern.face_corners(v)}
    adj = _dual_adjacency(pattern, blocked)
    prev: dict[int, tuple[int, int] | None] = {s: None for s in sources}
    queue = deque(sources)
    hit = None
    while queue:
        a = queue.popleft()
        if a in targets:
            hit = a
            break
        for b, k in adj.get(a, []):
            if b not in prev:
                prev[b] = (a, k)
                queue.append(b)
    if hit is None:
        raise ValueError(f"no dual path between the faces of {u} and {v}")
    corners, chords = [hit], []
    while prev[corners[-1]] is not None:
        a, k = prev[corners[-1]]
        chords.append(k)
        corners.append(a)
    corners.reverse()
    chords.reverse()

    pts = [pattern.centers[u]] + [pattern.dual[c] for c in corners] + [pattern.centers[v]]
    segs = [pts[i + 1] - pts[i] for i in range(len(pts) - 1)]
    turning = float(sum(turning_angle(segs[i], segs[i + 1]) for i in range(len(segs) - 1)))

    tau = np.ones(g.n_directed)
    for i, k in enumerate(chords):
        p = pattern.dual[corners[i]]
        c = pattern.dual[corners[i + 1]] - p
        for e in (g.forward[k], g.reverse[g.forward[k]]):
            head = pattern.centers[g.head[e]]
            if (np.conj(c) * (head - p)).imag > 0:  # head left of the curve
                tau[e] = -1.0
    return DefectCurve(int(u), int(v), tuple(int(c) for c in corners),
                       tuple(int(k) for k in chords), tau, complex(segs[0]),
                       complex(segs[-1]), turning)


def defect_signs(pattern: CirclePattern, u: int, v: int, **kwargs) -> np.ndarray:
    """Signs tau with tau_e tau_{-e} = -1 exactly on edges crossed by the curve."""
    return defect_curve(pattern, u, v, **kwargs).tau
