"""s-holomorphic functions, the S operator and the discrete boundary value problem."""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .kacward import build_system, critical_rho
from .pattern import CirclePattern, HalfEdgeGraph, half_edge_extension
from .weights import critical_directed_weights


class SholoError(ValueError):
    pass


@dataclass(frozen=True)
class Domain:
    """Edge data needed by the s-holomorphic machinery.

    Built from a full pattern or from a region with its outward half-edges.
    ``chords`` holds the two dual vertices of each undirected edge; ``rho``
    and ``x`` are the critical eigenvector and weights per directed edge.
    """

    graph: object
    chords: np.ndarray
    dual: np.ndarray
    rho: np.ndarray
    x: np.ndarray
    interior: np.ndarray
    outward: np.ndarray

    @classmethod
    def of(cls, obj) -> "Domain":
        if isinstance(obj, Domain):
            return obj
        if isinstance(obj, HalfEdgeGraph):
            p = obj.pattern
            mask = np.zeros(obj.graph.n_vertices, dtype=bool)
            mask[obj.interior] = True
            return cls(obj.graph, obj.chords, p.dual, obj.inherit(critical_rho(p)),
                       obj.inherit(critical_directed_weights(p).values), mask,
                       np.asarray(obj.outward))
        if isinstance(obj, CirclePattern):
            return cls(obj.graph, np.asarray(obj.chords), obj.dual, critical_rho(obj),
                       critical_directed_weights(obj).values, ~np.asarray(obj.boundary),
                       np.zeros(0, dtype=np.int64))
        raise TypeError(f"cannot build a domain from {type(obj).__name__}")

    @property
    def eta(self) -> np.ndarray:
        return self.graph.direction()

    def dual_eta(self) -> np.ndarray:
        """Chord vector of each directed edge, oriented to the left of the edge."""
        g = self.graph
        c = self.chords[g.undirected]
        eta_star = self.dual[c[:, 1]] - self.dual[c[:, 0]]
        flip = (eta_star / self.eta).imag < 0
        return np.where(flip, -eta_star, eta_star)


# -- lines and projections ---------------------------------------------------

def line_spanner(eta, branch: int = 1):
    """Unit vector spanning eta^(-1/2) R on the principal branch (``branch=-1`` flips it)."""
    eta = np.asarray(eta, dtype=complex)
    if np.any(eta == 0):
        raise SholoError("zero-length edge has no line")
    r = np.sqrt(eta)
    return branch * np.conj(r) / np.abs(r)


def project(z, eta, branch: int = 1):
    """Orthogonal projection of z onto the real line eta^(-1/2) R."""
    lam = line_spanner(eta, branch)
    return lam * np.real(np.conj(lam) * np.asarray(z, dtype=complex))


def s_operator(domain, f) -> np.ndarray:
    """(Sf)(e) = rho_e Proj(f(e); l_e) for f given per undirected edge."""
    d = Domain.of(domain)
    f = np.asarray(f, dtype=complex)
    return d.rho * project(f[d.graph.undirected], d.eta)


def s_inverse(domain, phi) -> np.ndarray:
    """f(e) = (phi(e) + phi(-e)) / rho_e, per undirected edge."""
    d = Domain.of(domain)
    g = d.graph
    phi = np.asarray(phi, dtype=complex)
    fwd = g.forward
    f = np.empty(g.n_edges, dtype=complex)
    f[g.undirected[fwd]] = (phi[fwd] + phi[g.reverse[fwd]]) / d.rho[fwd]
    return f


def line_residual(domain, phi) -> np.ndarray:
    """Distance of each phi(e) from its line l_e."""
    d = Domain.of(domain)
    lam = line_spanner(d.eta)
    return np.abs(np.imag(np.conj(lam) * np.asarray(phi, dtype=complex)))


def scale_of(f) -> float:
    f = np.asarray(f)
    return max(1.0, float(np.max(np.abs(f)))) if f.size else 1.0


# -- s-holomorphicity ----------------------------------------------------------

def _check_interior(d: Domain, v: int):
    if not d.interior[v]:
        raise SholoError(f"vertex {v} is not interior; s-holomorphicity is undefined there")


def corner_pairs(domain, v: int) -> list[tuple[int, int, int]]:
    """(dual vertex, edge1, edge2) for each dual vertex around v."""
    d = Domain.of(domain)
    g = d.graph
    at = {}
    for k in g.out_edges[v]:
        for c in d.chords[g.undirected[k]]:
            at.setdefault(int(c), []).append(int(g.undirected[k]))
    out = []
    for c, es in sorted(at.items()):
        if len(es) != 2:
            raise SholoError(f"dual vertex {c} touches {len(es)} edges at vertex {v}")
        out.append((c, es[0], es[1]))
    return out


def sholo_residual(domain, f, v: int) -> float:
    d = Domain.of(domain)
    _check_interior(d, v)
    f = np.asarray(f, dtype=complex)
    z0 = d.graph.positions[v]
    worst = 0.0
    for c, e1, e2 in corner_pairs(d, v):
        eta = z0 - d.dual[c]
        worst = max(worst, abs(project(f[e1], eta) - project(f[e2], eta)))
    return float(worst)


def is_sholomorphic(domain, f, v: int, tol: float = 1e-9) -> tuple[bool, float]:
    """Projection equalities at every corner of v, relative to max(1, |f|)."""
    res = sholo_residual(domain, f, v) / scale_of(f)
    return res <= tol, res


def kacward_residual(domain, f, v: int) -> float:
    """max over In_v of |(T S f)(e)|, the matrix form of s-holomorphicity."""
    d = Domain.of(domain)
    _check_interior(d, v)
    system = build_system(d.graph, d.x)
    r = system.T() @ s_operator(d, f)
    return float(np.max(np.abs(r[d.graph.in_edges[v]])))


# -- boundary value problem ----------------------------------------------------

@dataclass(frozen=True)
class BVPSolution:
    domain: Domain
    boundary_data: np.ndarray
    phi: np.ndarray
    f: np.ndarray

    def to_dict(self) -> dict:
        return {"boundary": {str(int(k)): [self.boundary_data[k].real, self.boundary_data[k].imag]
                             for k in np.flatnonzero(self.boundary_data)},
                "f": [[z.real, z.imag] for z in self.f]}


def admissible_boundary(domain, values=None, seed=None) -> np.ndarray:
    """Boundary datum on the outward half-edges lying on their lines.

    ``values`` gives real coordinates along each line; random if omitted.
    """
    d = Domain.of(domain)
    n_out = len(d.outward)
    if values is None:
        values = np.random.default_rng(seed).standard_normal(n_out)
    values = np.asarray(values, dtype=float)
    phi = np.zeros(d.graph.n_directed, dtype=complex)
    phi[d.outward] = values * line_spanner(d.eta[d.outward])
    return phi


def solve_bvp(domain, phi, tol: float = 1e-9, check_lines: bool = True) -> BVPSolution:
    """Unique f, s-holomorphic inside the region, with Sf = phi on outward half-edges.

    ``check_lines=False`` accepts data off the lines l_e (such as zeta = T rho,
    which is real); the Kac-Ward solve is then still defined but f need not
    reproduce the datum through S.
    """
    d = Domain.of(domain)
    if len(d.outward) == 0:
        raise SholoError("domain has no outward half-edges")
    phi = np.asarray(phi, dtype=complex)
    if phi.shape != (d.graph.n_directed,):
        raise SholoError(f"boundary datum has shape {phi.shape}")
    is_out = np.zeros(d.graph.n_directed, dtype=bool)
    is_out[d.outward] = True
    stray = np.flatnonzero((~is_out) & (np.abs(phi) > tol * scale_of(phi)))
    if len(stray):
        raise SholoError(f"boundary datum is nonzero on non-boundary edge {int(stray[0])}")
    phi = np.where(is_out, phi, 0)
    off = line_residual(d, phi)
    bad = np.flatnonzero(off > tol * scale_of(phi))
    if check_lines and len(bad):
        raise SholoError(f"boundary datum on edge {int(bad[0])} is off its line by {off[bad[0]]:.3e}")
    system = build_system(d.graph, d.x)
    psi = system.solve(phi)
    return BVPSolution(d, phi, psi, s_inverse(d, psi))


def zeta_boundary(domain) -> np.ndarray:
    """zeta = T rho: rho on outward half-edges and zero elsewhere."""
    d = Domain.of(domain)
    return build_system(d.graph, d.x).T() @ d.rho.astype(complex)


# -- contour sums --------------------------------------------------------------

def contour_check_f(domain, f, v: int) -> complex:
    """Sum over Out_v of eta_{e*} f(e)."""
    d = Domain.of(domain)
    _check_interior(d, v)
    g = d.graph
    out = g.out_edges[v]
    f = np.asarray(f, dtype=complex)
    return complex(np.sum(d.dual_eta()[out] * f[g.undirected[out]]))


@dataclass(frozen=True)
class ContourF2:
    real: float
    imag: float
    norm_gap: float

    @property
    def identity_error(self) -> float:
        return abs(self.imag - self.norm_gap)


def contour_check_f2(domain, f, v: int) -> ContourF2:
    """Re and Im of the sum over Out_v of eta_{e*} f(e)^2, with ||phi_out||^2 - ||phi_in||^2."""
    d = Domain.of(domain)
    _check_interior(d, v)
    g = d.graph
    out = g.out_edges[v]
    f = np.asarray(f, dtype=complex)
    s = np.sum(d.dual_eta()[out] * f[g.undirected[out]] ** 2)
    phi = s_operator(d, f)
    gap = np.sum(np.abs(phi[out]) ** 2) - np.sum(np.abs(phi[g.reverse[out]]) ** 2)
    return ContourF2(float(s.real), float(s.imag), float(gap))


def edge_identity_residuals(domain, f) -> tuple[float, float]:
    """Worst per-edge errors of Re(eta* f^2) = 2 D* phi(e) phi(-e) and Im(eta* f^2) = |phi(e)|^2 - |phi(-e)|^2."""
    d = Domain.of(domain)
    g = d.graph
    f = np.asarray(f, dtype=complex)
    phi = s_operator(d, f)
    es = d.dual_eta()
    lhs = es * f[g.undirected] ** 2
    D = es / np.abs(es)
    re_rhs = 2 * D * phi * phi[g.reverse]
    im_rhs = np.abs(phi) ** 2 - np.abs(phi[g.reverse]) ** 2
    return (float(np.max(np.abs(lhs.real - re_rhs))),
            float(np.max(np.abs(lhs.imag - im_rhs))))


def skew_symmetry_residual(pattern, v: int) -> float:
    """max |D B + (D B)^T| for the critical block B at v and D = diag(eta / |eta|)."""
    from .kacward import block_from_weights
    g = pattern.graph
    out = g.out_edges[v]
    x = critical_directed_weights(pattern).values
    B = block_from_weights(g.direction(out), x[out])
    D = np.diag(g.direction(out) / np.abs(g.direction(out)))
    M = D @ B
    return float(np.max(np.abs(M + M.T))) if M.size else 0.0


# -- JSON --------------------------------------------------------------------

def bvp_problem_json(pattern, region, phi) -> str:
    bar = half_edge_extension(pattern, region)
    phi = np.asarray(phi, dtype=complex)
    return json.dumps({"pattern": pattern.fingerprint(),
                       "region": [int(r) for r in bar.region],
                       "boundary": {str(int(k)): [phi[k].real, phi[k].imag]
                                    for k in np.flatnonzero(phi)}},
                      sort_keys=True)


def bvp_problem_from_json(pattern, text: str):
    raw = json.loads(text)
    if raw.get("pattern") not in (None, pattern.fingerprint()):
        raise SholoError("problem was written for a different pattern")
    bar = half_edge_extension(pattern, raw["region"])
    phi = np.zeros(bar.graph.n_directed, dtype=complex)
    for k, (re, im) in raw["boundary"].items():
        phi[int(k)] = complex(re, im)
    return bar, phi
