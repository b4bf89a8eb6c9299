"""Circle patterns and their dual graphs.

A circle pattern is stored as raw geometry: circle centers and radii (the
primal vertices), the intersection points of adjacent circles (the dual
vertices), and for every primal edge the pair of dual vertices spanning its
chord.  Half-angles and chord lengths are recovered once, at build time.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .graph import EmbeddedGraph

DEFAULT_TOL = 1e-9


class PatternError(ValueError):
    """Raised for raw geometry that cannot describe a circle pattern."""


class NonAcuteTriangleError(PatternError):
    def __init__(self, triangle, angles):
        self.triangle = tuple(int(t) for t in triangle)
        self.angles = tuple(float(a) for a in angles)
        super().__init__(
            f"triangle {self.triangle} is not acute "
            f"(max angle {max(self.angles):.12g} rad)")


@dataclass(frozen=True)
class CirclePattern:
    """Primal graph at circle centers plus the dual circle-intersection points.

    Half-angles are indexed by the directed edges of ``graph`` and chord
    lengths by its undirected edges.  Instances are immutable.
    """

    centers: np.ndarray
    radii: np.ndarray
    boundary: np.ndarray
    dual: np.ndarray
    edges: np.ndarray
    chords: np.ndarray
    tol: float = DEFAULT_TOL
    graph: EmbeddedGraph = field(init=False, repr=False)
    half_angles: np.ndarray = field(init=False, repr=False)
    chord_lengths: np.ndarray = field(init=False, repr=False)
    clamp_shift: float = field(init=False, repr=False)

    def __post_init__(self):
        centers = np.asarray(self.centers, dtype=complex).reshape(-1)
        radii = np.asarray(self.radii, dtype=float).reshape(-1)
        boundary = np.asarray(self.boundary, dtype=bool).reshape(-1)
        dual = np.asarray(self.dual, dtype=complex).reshape(-1)
        edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        chords = np.asarray(self.chords, dtype=np.int64).reshape(-1, 2)
        if not (len(centers) == len(radii) == len(boundary)):
            raise PatternError("primal arrays differ in length")
        if len(edges) != len(chords):
            raise PatternError("every edge needs exactly one chord")
        if np.any(radii <= 0):
            bad = int(np.flatnonzero(radii <= 0)[0])
            raise PatternError(f"radius of primal vertex {bad} is not positive")
        if chords.size and (chords.min() < 0 or chords.max() >= len(dual)):
            raise PatternError("chord endpoint out of range")
        if edges.size and (edges.min() < 0 or edges.max() >= len(centers)):
            raise PatternError("edge endpoint out of range")
        keys = {tuple(sorted(e)) for e in edges.tolist()}
        if len(keys) != len(edges):
            raise PatternError("duplicate primal edge")
        try:
            graph = EmbeddedGraph(centers, edges)
        except ValueError as exc:
            raise PatternError(str(exc)) from exc
        crossings = graph.crossing_pairs()
        if crossings:
            i, j = crossings[0]
            raise PatternError(
                f"non-planar combinatorics: edges {tuple(edges[i])} and "
                f"{tuple(edges[j])} cross")

        lengths = np.abs(dual[chords[:, 0]] - dual[chords[:, 1]])
        arg = lengths[graph.undirected] / (2.0 * radii[graph.tail])
        if np.any(arg > 1.0 + self.tol):
            k = int(np.argmax(arg))
            raise PatternError(
                f"chord of edge {tuple(edges[graph.undirected[k]])} longer than "
                f"the diameter at vertex {int(graph.tail[k])} (ratio {arg[k]:.6g})")
        clamped = np.clip(arg, -1.0, 1.0)
        object.__setattr__(self, "centers", centers)
        object.__setattr__(self, "radii", radii)
        object.__setattr__(self, "boundary", boundary)
        object.__setattr__(self, "dual", dual)
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "chords", chords)
        object.__setattr__(self, "graph", graph)
        object.__setattr__(self, "half_angles", np.arcsin(clamped))
        object.__setattr__(self, "chord_lengths", lengths)
        object.__setattr__(self, "clamp_shift",
                           float(np.max(np.abs(arg - clamped), initial=0.0)))

    # -- accessors ---------------------------------------------------------

    @property
    def n_vertices(self) -> int:
        return len(self.centers)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.boundary)

    @property
    def max_radius(self) -> float:
        return float(self.radii.max())

    def neighbor_max_radius(self, v: int) -> float:
        nbrs = self.graph.neighbors(v)
        return float(self.radii[nbrs].max()) if len(nbrs) else 0.0

    def angle_sums(self) -> np.ndarray:
        return np.bincount(self.graph.tail, weights=self.half_angles,
                           minlength=self.n_vertices)

    def angle_margin(self) -> float:
        """Largest epsilon for which the bounded angle property holds."""
        th = self.half_angles
        return float(min(th.min(), (np.pi / 2 - th).min()))

    def detected_boundary(self, tol: float | None = None) -> np.ndarray:
        tol = self.tol if tol is None else tol
        return np.abs(self.angle_sums() - np.pi) > tol * np.pi

    def chord_endpoints(self, k: int) -> tuple[complex, complex]:
        a, b = self.chords[k]
        return complex(self.dual[a]), complex(self.dual[b])

    def face_corners(self, v: int) -> np.ndarray:
        """Dual vertices on the boundary of the face of the circle pattern at ``v``.

        Interior faces are read off the chords; truncated boundary faces also
        pick up every dual vertex lying on the circle.
        """
        ks = self.graph.undirected[self.graph.out_edges[v]]
        corners = set(self.chords[ks].reshape(-1).tolist())
        if self.boundary[v]:
            d = np.abs(np.abs(self.dual - self.centers[v]) - self.radii[v])
            corners.update(np.flatnonzero(d <= self.tol * self.radii[v] * 10).tolist())
        corners = np.array(sorted(corners), dtype=np.int64)
        ang = np.angle(self.dual[corners] - self.centers[v])
        return corners[np.argsort(ang, kind="stable")]

    def edges_at_corner(self, v: int, corner: int) -> list[int]:
        """Directed edges out of ``v`` whose chord ends at dual vertex ``corner``."""
        out = self.graph.out_edges[v]
        ks = self.graph.undirected[out]
        hit = np.any(self.chords[ks] == corner, axis=1)
        return [int(e) for e in out[hit]]

    def subpattern(self, vertices) -> "CirclePattern":
        """Pattern restricted to the primal vertices ``vertices`` (all dual points kept).

        Vertices that lose a neighbour are flagged as boundary.
        """
        vertices = np.asarray(sorted(set(int(v) for v in vertices)), dtype=np.int64)
        index = -np.ones(self.n_vertices, dtype=np.int64)
        index[vertices] = np.arange(len(vertices))
        keep = (index[self.edges[:, 0]] >= 0) & (index[self.edges[:, 1]] >= 0)
        edges = index[self.edges[keep]]
        deg_full = np.bincount(self.edges.reshape(-1), minlength=self.n_vertices)
        deg_sub = np.bincount(edges.reshape(-1), minlength=len(vertices))
        boundary = self.boundary[vertices] | (deg_sub < deg_full[vertices])
        return CirclePattern(self.centers[vertices], self.radii[vertices], boundary,
                             self.dual, edges, self.chords[keep], tol=self.tol)

    # -- persistence -------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "primal": [{"x": float(c.real), "y": float(c.imag), "r": float(r),
                        "boundary": bool(b)}
                       for c, r, b in zip(self.centers, self.radii, self.boundary)],
            "dual": [{"x": float(d.real), "y": float(d.imag)} for d in self.dual],
            "edges": [{"u": int(u), "v": int(v), "du": int(a), "dv": int(b)}
                      for (u, v), (a, b) in zip(self.edges, self.chords)],
        }

    def to_json(self, path=None, indent=1) -> str:
        text = json.dumps(self.to_dict(), indent=indent)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text + "\n")
        return text

    def fingerprint(self) -> str:
        """SHA-256 of the canonical JSON form."""
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def build_pattern(raw, tol: float = DEFAULT_TOL) -> CirclePattern:
    """Build a pattern from raw geometry in the JSON schema layout.

    ``raw`` is a mapping with ``primal`` (x, y, r, optional boundary),
    ``dual`` (x, y) and ``edges`` (u, v, du, dv) lists.
    """
    try:
        primal = raw["primal"]
        dual = raw["dual"]
        edges = raw["edges"]
    except (KeyError, TypeError) as exc:
        raise PatternError(f"malformed raw geometry: {exc}") from exc
    centers = np.array([complex(p["x"], p["y"]) for p in primal])
    radii = np.array([float(p["r"]) for p in primal])
    boundary = np.array([bool(p.get("boundary", False)) for p in primal])
    dpos = np.array([complex(d["x"], d["y"]) for d in dual])
    e = np.array([[int(q["u"]), int(q["v"])] for q in edges], dtype=np.int64).reshape(-1, 2)
    c = np.array([[int(q["du"]), int(q["dv"])] for q in edges], dtype=np.int64).reshape(-1, 2)
    return CirclePattern(centers, radii, boundary, dpos, e, c, tol=tol)


def load_pattern(path, tol: float = DEFAULT_TOL) -> CirclePattern:
    with open(path) as fh:
        return build_pattern(json.load(fh), tol=tol)


# -- validation --------------------------------------------------------------

@dataclass
class CheckResult:
    name: str
    passed: bool
    worst: float
    offenders: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "worst": self.worst, "offenders": self.offenders}


@dataclass
class ValidationReport:
    checks: dict
    epsilon: float
    tol: float

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks.values())

    def failures(self) -> list[str]:
        return [name for name, c in self.checks.items() if not c.passed]

    def to_dict(self) -> dict:
        return {"passed": self.passed, "epsilon": self.epsilon, "tol": self.tol,
                "checks": {k: c.to_dict() for k, c in self.checks.items()}}

    def summary(self) -> str:
        lines = []
        for name, c in self.checks.items():
            status = "ok  " if c.passed else "FAIL"
            extra = f" offenders={c.offenders[:5]}" if c.offenders else ""
            lines.append(f"{status} {name:<18} worst={c.worst:.3e}{extra}")
        return "\n".join(lines)


def _check(name, magnitudes, ids, limit):
    magnitudes = np.asarray(magnitudes, dtype=float)
    bad = magnitudes > limit
    worst = float(magnitudes.max()) if magnitudes.size else 0.0
    offenders = [ids[i] for i in np.flatnonzero(bad)]
    return CheckResult(name, not bad.any(), worst, offenders)


def validate(pattern: CirclePattern, epsilon: float | None = None,
             tol: float = DEFAULT_TOL) -> ValidationReport:
    """Check every pattern invariant; failures are report entries, never errors.

    Magnitudes are relative: angles against pi, lengths against the radius.
    Boundary vertices are exempt from the angle-sum check.
    """
    g = pattern.graph
    eps = 0.0 if epsilon is None else float(epsilon)
    checks = {}

    sums = pattern.angle_sums()
    interior = np.flatnonzero(~pattern.boundary)
    checks["angle_sum"] = _check(
        "angle_sum", np.abs(sums[interior] - np.pi) / np.pi,
        [int(v) for v in interior], tol)

    # chord endpoints must lie on both circles, and 2 r sin(theta) = |e*|
    mags = np.zeros(pattern.n_edges)
    for w in (0, 1):
        c = pattern.centers[pattern.edges[:, w]][:, None]
        r = pattern.radii[pattern.edges[:, w]][:, None]
        ends = pattern.dual[pattern.chords]
        mags = np.maximum(mags, (np.abs(np.abs(ends - c) - r) / r).max(axis=1))
    th = pattern.half_angles
    rel = np.abs(2 * pattern.radii[g.tail] * np.sin(th)
                 - pattern.chord_lengths[g.undirected]) / pattern.radii[g.tail]
    np.maximum.at(mags, g.undirected, rel)
    checks["chord_consistency"] = _check(
        "chord_consistency", mags, [tuple(int(x) for x in e) for e in pattern.edges], tol)

    # with epsilon = 0 this still demands 0 < theta < pi/2
    viol = np.maximum(np.maximum(eps - th, th - (np.pi / 2 - eps)), 0.0)
    if eps == 0.0:
        viol = np.where((th <= 0) | (th >= np.pi / 2), np.pi / 2, viol)
    checks["bounded_angle"] = _check(
        "bounded_angle", viol / np.pi,
        [(int(a), int(b)) for a, b in zip(g.tail, g.head)], tol)

    gaps = []
    for v in range(pattern.n_vertices):
        corners = pattern.face_corners(v)
        if len(corners) < 2:
            gaps.append(0.0)
            continue
        ang = np.sort(np.angle(pattern.dual[corners] - pattern.centers[v]))
        diffs = np.diff(np.concatenate([ang, [ang[0] + 2 * np.pi]]))
        gaps.append(max(0.0, (diffs.max() - np.pi) / np.pi))
    checks["center_in_face"] = _check(
        "center_in_face", gaps, list(range(pattern.n_vertices)), tol)

    rev = g.reverse
    pair_bad = ((rev[rev] != np.arange(g.n_directed)) | (rev == np.arange(g.n_directed))
                | (g.tail[rev] != g.head) | (g.head[rev] != g.tail))
    pos_bad = np.abs(g.direction() - (pattern.centers[g.head] - pattern.centers[g.tail])) > 0
    checks["reversal_pairing"] = _check(
        "reversal_pairing", (pair_bad | pos_bad).astype(float),
        list(range(g.n_directed)), 0.5)

    return ValidationReport(checks, eps, tol)


# -- generators --------------------------------------------------------------

def _rectangular_grid(col_widths, row_height, rows) -> CirclePattern:
    """Grid of rectangles with given column widths; primal vertices at centers."""
    widths = np.asarray(col_widths, dtype=float)
    if np.any(widths <= 0) or row_height <= 0:
        raise PatternError("column widths and row height must be positive")
    cols = len(widths)
    if cols < 1 or rows < 1:
        raise PatternError("grid needs at least one row and one column")
    xs = np.concatenate([[0.0], np.cumsum(widths)])
    ys = row_height * np.arange(rows + 1)
    dual = (xs[None, :] + 1j * ys[:, None]).reshape(-1)  # index j*(cols+1)+i

    def d(i, j):
        return j * (cols + 1) + i

    def p(i, j):
        return j * cols + i

    cx = 0.5 * (xs[:-1] + xs[1:])
    cy = 0.5 * (ys[:-1] + ys[1:])
    centers = (cx[None, :] + 1j * cy[:, None]).reshape(-1)
    radii = np.tile(0.5 * np.hypot(widths, row_height), rows)
    ii, jj = np.meshgrid(np.arange(cols), np.arange(rows))
    boundary = ((ii == 0) | (ii == cols - 1) | (jj == 0) | (jj == rows - 1)).reshape(-1)
    edges, chords = [], []
    for j in range(rows):
        for i in range(cols):
            if i + 1 < cols:
                edges.append((p(i, j), p(i + 1, j)))
                chords.append((d(i + 1, j), d(i + 1, j + 1)))
            if j + 1 < rows:
                edges.append((p(i, j), p(i, j + 1)))
                chords.append((d(i, j + 1), d(i + 1, j + 1)))
    return CirclePattern(centers, radii, boundary, dual,
                         np.array(edges, dtype=np.int64).reshape(-1, 2),
                         np.array(chords, dtype=np.int64).reshape(-1, 2))


def generate_isoradial_square(width: int, height: int, radius: float = 1.0) -> CirclePattern:
    """``width`` x ``height`` square-lattice patch; every circle has ``radius``."""
    if width < 1 or height < 1:
        raise PatternError("width and height must be at least 1")
    if radius <= 0:
        raise PatternError("radius must be positive")
    side = radius * math.sqrt(2.0)
    return _rectangular_grid(np.full(width, side), side, height)


def generate_stretched_square(column_heights, rows: int | None = None,
                              row_spacing: float = 1.0) -> CirclePattern:
    """Z^2 patch whose i-th column of faces is stretched to extent ``column_heights[i]``.

    Faces are ``column_heights[i]`` x ``row_spacing`` rectangles, so vertical
    primal edges in a column all share one coupling and horizontal couplings
    satisfy ``tanh J_{i,i+1} = exp(-J_i - J_{i+1})``.
    """
    h = [float(x) for x in column_heights]
    if not h:
        raise PatternError("need at least one column")
    if any(x <= 0 for x in h):
        raise PatternError("column heights must be positive")
    rows = len(h) if rows is None else int(rows)
    return _rectangular_grid(h, row_spacing, rows)


def triangular_grid_points(width: int, height: int, spacing: float = 1.0):
    """Points and triangles of an equilateral patch: ``height`` rows of triangles."""
    rows = []
    pts = []
    for j in range(height + 1):
        row = []
        off = 0.5 * (j % 2)
        for i in range(width + 1):
            row.append(len(pts))
            pts.append(complex(i + off, j * math.sqrt(3) / 2) * spacing)
        rows.append(row)
    tris = []
    for j in range(height):
        lo, up = rows[j], rows[j + 1]
        for i in range(width):
            if j % 2 == 0:
                tris.append((lo[i], lo[i + 1], up[i]))
                tris.append((lo[i + 1], up[i + 1], up[i]))
            else:
                tris.append((lo[i], lo[i + 1], up[i + 1]))
                tris.append((lo[i], up[i + 1], up[i]))
    return np.array(pts), np.array(tris, dtype=np.int64)


def _circumcenter(a, b, c):
    d = 2 * (a.real * (b.imag - c.imag) + b.real * (c.imag - a.imag)
             + c.real * (a.imag - b.imag))
    aa, bb, cc = abs(a) ** 2, abs(b) ** 2, abs(c) ** 2
    ux = (aa * (b.imag - c.imag) + bb * (c.imag - a.imag) + cc * (a.imag - b.imag)) / d
    uy = (aa * (c.real - b.real) + bb * (a.real - c.real) + cc * (b.real - a.real)) / d
    return complex(ux, uy)


def triangle_angles(a, b, c):
    def ang(p, q, r):
        return abs(np.angle((q - p) / (r - p)))
    return ang(a, b, c), ang(b, c, a), ang(c, a, b)


def pattern_from_triangulation(points, triangles, margin: float = 1e-12) -> CirclePattern:
    """Circle pattern of an acute triangulation: one primal vertex per triangle.

    Raises :class:`NonAcuteTriangleError` naming the first triangle with an
    angle of at least ``pi/2 - margin``.
    """
    pts = np.asarray(points, dtype=complex)
    tris = np.asarray(triangles, dtype=np.int64).reshape(-1, 3)
    centers, radii = [], []
    for t in tris:
        a, b, c = pts[t]
        angles = triangle_angles(a, b, c)
        if max(angles) >= np.pi / 2 - margin:
            raise NonAcuteTriangleError(t, angles)
        cc = _circumcenter(a, b, c)
        centers.append(cc)
        radii.append(abs(a - cc))
    owner = {}
    for ti, t in enumerate(tris):
        for s in range(3):
            key = tuple(sorted((int(t[s]), int(t[(s + 1) % 3]))))
            owner.setdefault(key, []).append(ti)
    edges, chords = [], []
    for key in sorted(owner):
        ts = owner[key]
        if len(ts) == 2:
            edges.append(tuple(ts))
            chords.append(key)
        elif len(ts) > 2:
            raise PatternError(f"triangle side {key} shared by {len(ts)} triangles")
    deg = np.zeros(len(tris), dtype=np.int64)
    for a, b in edges:
        deg[a] += 1
        deg[b] += 1
    return CirclePattern(np.array(centers), np.array(radii), deg < 3, pts,
                         np.array(edges, dtype=np.int64).reshape(-1, 2),
                         np.array(chords, dtype=np.int64).reshape(-1, 2))


def generate_acute_triangulation(seed: int, width: int, height: int,
                                 jitter: float = 0.05, spacing: float = 1.0) -> CirclePattern:
    """Jittered equilateral triangulation turned into its circle pattern.

    Each point moves by a uniform offset of length at most ``jitter * spacing``.
    Acuteness is checked after jittering, never assumed.
    """
    if width < 1 or height < 1:
        raise PatternError("width and height must be at least 1")
    pts, tris = triangular_grid_points(width, height, spacing)
    rng = np.random.default_rng(seed)
    r = jitter * spacing * np.sqrt(rng.random(len(pts)))
    phi = 2 * np.pi * rng.random(len(pts))
    pts = pts + r * np.exp(1j * phi)
    return pattern_from_triangulation(pts, tris)


GENERATORS = ("isoradial-square", "stretched-square", "acute-triangulation")


# -- half-edge extension -------------------------------------------------------

@dataclass(frozen=True)
class HalfEdgeGraph:
    """A region of a pattern plus the half-edges of its boundary edges.

    Vertex ``i < len(region)`` is pattern vertex ``region[i]``; the remaining
    vertices are midpoints of edges leaving the region.  ``parent`` maps each
    directed edge to the pattern's directed edge with the same orientation, so
    weights, half-angles and chords are inherited.
    """

    pattern: CirclePattern
    region: np.ndarray
    graph: EmbeddedGraph
    parent: np.ndarray
    outward: np.ndarray

    @property
    def chords(self) -> np.ndarray:
        und = self.pattern.graph.undirected[self.parent[self.graph.forward]]
        out = np.empty((self.graph.n_edges, 2), dtype=np.int64)
        out[self.graph.undirected[self.graph.forward]] = self.pattern.chords[und]
        return out

    @property
    def dual(self) -> np.ndarray:
        return self.pattern.dual

    @property
    def interior(self) -> np.ndarray:
        return np.arange(len(self.region))

    @property
    def boundary(self) -> np.ndarray:
        return np.arange(self.graph.n_vertices) >= len(self.region)

    def inherit(self, values) -> np.ndarray:
        """Pull a per-directed-edge array of the pattern back to this graph."""
        return np.asarray(values)[self.parent]


def half_edge_extension(pattern: CirclePattern, region) -> HalfEdgeGraph:
    """Region plus outward half-edges; region vertices need full fans."""
    region = np.asarray(sorted(set(int(v) for v in region)), dtype=np.int64)
    if np.any(pattern.boundary[region]):
        bad = [int(v) for v in region[pattern.boundary[region]]]
        raise PatternError(f"region vertices {bad} lie on the pattern boundary")
    index = -np.ones(pattern.n_vertices, dtype=np.int64)
    index[region] = np.arange(len(region))
    g = pattern.graph
    pos = list(pattern.centers[region])
    edges, parents = [], []
    for k, (a, b) in enumerate(pattern.edges):
        ia, ib = index[a], index[b]
        if ia >= 0 and ib >= 0:
            edges.append((ia, ib))
            parents.append((g.directed_index(a, b), g.directed_index(b, a)))
        elif ia >= 0 or ib >= 0:
            inner, outer = (a, b) if ia >= 0 else (b, a)
            pos.append(0.5 * (pattern.centers[a] + pattern.centers[b]))
            edges.append((index[inner], len(pos) - 1))
            parents.append((g.directed_index(inner, outer), g.directed_index(outer, inner)))
    bar = EmbeddedGraph(np.array(pos), np.array(edges, dtype=np.int64).reshape(-1, 2))
    parent = np.empty(bar.n_directed, dtype=np.int64)
    for k, (pf, pr) in enumerate(parents):
        f = bar.directed_index(*bar.edges[k])
        parent[f] = pf
        parent[bar.reverse[f]] = pr
    outward = np.flatnonzero(bar.head >= len(region))
    return HalfEdgeGraph(pattern, region, bar, parent, outward)
