"""Two-point functions, the phi functional, magnetization and decay diagnostics."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import oracle
from .graph import turning_angle
from .kacward import KacWardError, build_system
from .weights import (beta_deformed_weights, critical_couplings, decay_constant,
                      defect_curve)

log = logging.getLogger(__name__)

METHODS = ("kacward", "spin_oracle", "hte_oracle")


class BoundViolationError(AssertionError):
    """A proven inequality failed numerically; carries the offending data."""

    def __init__(self, message, artifact=None):
        super().__init__(message)
        self.artifact = artifact or {}


class MonteCarloError(RuntimeError):
    pass


@dataclass(frozen=True)
class CorrelationResult:
    value: float
    method: str
    beta: float
    u: int
    v: int
    defect: str = ""
    imag: float = 0.0

    def to_dict(self) -> dict:
        return {"value": self.value, "method": self.method, "beta": self.beta,
                "u": self.u, "v": self.v, "defect": self.defect}


# -- exact two-point function ------------------------------------------------

def _angle(a, b) -> float:
    return float(turning_angle(a, b))


def _two_point_terms(pattern, xt, X, col, u, v, curve):
    """Trace terms from cutting the defect path at its two ends."""
    g = pattern.graph
    a, b = curve.start_direction, curve.end_direction
    rot = np.exp(0.5j * curve.internal_turning)
    t1 = 0j
    for e in g.out_edges[v]:
        for gg in g.in_edges[u]:
            ph = _angle(b, g.direction(e)) + _angle(g.direction(gg), a)
            t1 += xt[e] * xt[g.reverse[gg]] * np.exp(0.5j * ph) * X[e, col[gg]]
    t2 = 0j
    for gp in g.out_edges[u]:
        for ee in g.in_edges[v]:
            ph = _angle(g.direction(ee), -b) + _angle(-a, g.direction(gp))
            t2 += xt[gp] * xt[g.reverse[ee]] * np.exp(0.5j * ph) * X[gp, col[ee]]
    return rot * t1, np.conj(rot) * t2


def kacward_two_point(pattern, beta: float, u: int, v: int, curve=None,
                      imag_tol: float = 1e-10, **curve_kwargs) -> CorrelationResult:
    """Free-boundary two-point function from the inverse of a signed Kac-Ward matrix.

    The defect curve joins u to v; its crossed edges get sign -1 on one
    direction.  The value is -Re of the two end terms of the trace, scaled
    by the ratio of signed to unsigned partition functions.
    """
    u, v = int(u), int(v)
    if u == v:
        return CorrelationResult(1.0, "kacward", float(beta), u, v)
    if beta < 0:
        raise ValueError("beta must be nonnegative")
    if curve is None:
        curve = defect_curve(pattern, u, v, **curve_kwargs)
    if beta == 0:
        return CorrelationResult(0.0, "kacward", 0.0, u, v, curve.fingerprint())
    x = beta_deformed_weights(pattern, beta).values
    xt = curve.tau * x
    sys0 = build_system(pattern, x)
    syst = build_system(pattern, xt)
    ph0, la0 = sys0.slogdet()
    pht, lat = syst.slogdet()
    for ph in (ph0, pht):
        if abs(ph - 1) > 1e-8:
            raise KacWardError(f"determinant phase {ph} is not +1")
    ratio = np.exp(0.5 * (lat - la0))
    g = pattern.graph
    cols = np.concatenate([g.in_edges[u], g.in_edges[v]])
    col = {int(k): i for i, k in enumerate(cols)}
    rhs = np.zeros((g.n_directed, len(cols)), dtype=complex)
    rhs[cols, np.arange(len(cols))] = 1.0
    X = syst.solve(rhs)
    t1, t2 = _two_point_terms(pattern, xt, X, col, u, v, curve)
    val = -0.5 * ratio * (t1 + t2)
    if abs(val.imag) > imag_tol:
        raise KacWardError(f"two-point value has imaginary part {val.imag:.3e}")
    return CorrelationResult(float(val.real), "kacward", float(beta), u, v,
                             curve.fingerprint(), float(val.imag))


def spin_two_point(pattern, beta: float, u: int, v: int) -> CorrelationResult:
    res = oracle.spin_enumeration(oracle.SmallGraph.from_pattern(pattern), beta=beta)
    return CorrelationResult(res.two_point(u, v), "spin_oracle", float(beta), int(u), int(v))


def hte_two_point(pattern, beta: float, u: int, v: int) -> CorrelationResult:
    sg = oracle.SmallGraph.from_pattern(pattern).with_beta(beta)
    return CorrelationResult(oracle.two_point_hte(sg, u, v), "hte_oracle", float(beta),
                             int(u), int(v))


def two_point(pattern, beta: float, u: int, v: int, method: str = "kacward") -> CorrelationResult:
    if method == "kacward":
        return kacward_two_point(pattern, beta, u, v)
    if method == "spin_oracle":
        return spin_two_point(pattern, beta, u, v)
    if method == "hte_oracle":
        return hte_two_point(pattern, beta, u, v)
    raise ValueError(f"unknown method {method!r}; choose from {METHODS}")


def correlation_row(pattern, beta: float, v: int) -> np.ndarray:
    """All free two-point functions <s_u s_v> for fixed v via Kac-Ward."""
    out = np.empty(pattern.n_vertices)
    for u in range(pattern.n_vertices):
        out[u] = kacward_two_point(pattern, beta, u, v).value
    return out


# -- correlation sandwich ----------------------------------------------------

@dataclass(frozen=True)
class BoundsResult:
    """Kac-Ward bounds around an exact two-point value.

    ``lower`` is the max over In_u x Out_v of |T^-1(x)_{e,g}| / (x_{-e} x_g)
    and ``upper`` the sum over Out_v x In_u of |x_e x_{-g} T^-1(x^tau)_{e,g}|;
    these are the forms the path-sum argument supports for any positive
    weights.  ``lower_stated`` divides by x_e x_{-g} instead and
    ``upper_stated`` sums |x_{-e} x_g T^-1(x^tau)_{e,g}| over In_u x Out_v;
    they are reported but not asserted.
    """

    lower: float
    value: float
    upper: float
    lower_stated: float
    upper_stated: float

    @property
    def lower_slack(self) -> float:
        return self.value - self.lower

    @property
    def upper_slack(self) -> float:
        return self.upper - self.value

    def to_dict(self) -> dict:
        return {"lower": self.lower, "value": self.value, "upper": self.upper,
                "lower_stated": self.lower_stated, "upper_stated": self.upper_stated}


def correlation_bounds(pattern, beta: float, u: int, v: int, curve=None) -> BoundsResult:
    """Evaluate the lower and upper Kac-Ward bounds together with the exact value."""
    u, v = int(u), int(v)
    g = pattern.graph
    value = kacward_two_point(pattern, beta, u, v, curve=curve).value
    if beta == 0:
        return BoundsResult(0.0, value, 0.0, 0.0, 0.0)
    if curve is None:
        curve = defect_curve(pattern, u, v)
    x = beta_deformed_weights(pattern, beta).values
    xt = curve.tau * x
    ins_u, outs_v = g.in_edges[u], g.out_edges[v]
    n = g.n_directed

    def cols_of(system, cols):
        rhs = np.zeros((n, len(cols)), dtype=complex)
        rhs[cols, np.arange(len(cols))] = 1.0
        return system.solve(rhs)

    X0 = cols_of(build_system(pattern, x), outs_v)
    lower = lower_s = 0.0
    for e in ins_u:
        for j, gg in enumerate(outs_v):
            if e == gg:
                continue
            a = abs(X0[e, j])
            lower = max(lower, a / (x[g.reverse[e]] * x[gg]))
            lower_s = max(lower_s, a / (x[e] * x[g.reverse[gg]]))
    off = len(outs_v)
    Xt = cols_of(build_system(pattern, xt), np.concatenate([outs_v, g.in_edges[u]]))
    upper_s = 0.0
    for e in ins_u:
        for j, gg in enumerate(outs_v):
            upper_s += abs(xt[g.reverse[e]] * xt[gg]) * abs(Xt[e, j])
    upper = 0.0
    for e in g.out_edges[v]:
        for j, gg in enumerate(g.in_edges[u]):
            upper += abs(xt[e] * xt[g.reverse[gg]]) * abs(Xt[e, off + j])
    return BoundsResult(lower, value, upper, lower_s, upper_s)


def correlation_bounds_check(pattern, beta: float, u: int, v: int, slack: float = -1e-10,
                             curve=None) -> BoundsResult:
    """Evaluate the sandwich and raise with all matrices attached on violation."""
    res = correlation_bounds(pattern, beta, u, v, curve=curve)
    if min(res.lower_slack, res.upper_slack) < slack:
        x = beta_deformed_weights(pattern, beta).values
        system = build_system(pattern, x)
        artifact = {"bounds": res.to_dict(), "beta": beta, "u": u, "v": v,
                    "T": system.T_dense().tolist(), "T_inv": system.inverse().tolist()}
        raise BoundViolationError(f"correlation sandwich violated at ({u}, {v}, {beta}): "
                                  f"{res.to_dict()}", artifact)
    return res


# -- phi functional ----------------------------------------------------------

def _outside_flux(pattern, S, beta: float, J=None) -> np.ndarray:
    """For each u in sorted S, sum of tanh(beta J) over pattern edges leaving S."""
    J = critical_couplings(pattern) if J is None else J
    S = np.asarray(sorted(S))
    inS = np.zeros(pattern.n_vertices, dtype=bool)
    inS[S] = True
    local = {int(s): i for i, s in enumerate(S)}
    flux = np.zeros(len(S))
    for k, (a, b) in enumerate(np.asarray(pattern.edges).tolist()):
        if inS[a] and not inS[b]:
            flux[local[a]] += np.tanh(beta * J[k])
        elif inS[b] and not inS[a]:
            flux[local[b]] += np.tanh(beta * J[k])
    return flux


def _induced_connected(pattern, S) -> bool:
    S = set(int(s) for s in S)
    if not S:
        return False
    adj = pattern.graph.adjacency()
    start = next(iter(S))
    seen, stack = {start}, [start]
    while stack:
        a = stack.pop()
        for b in adj[a]:
            b = int(b)
            if b in S and b not in seen:
                seen.add(b)
                stack.append(b)
    return seen == S


def induced_correlations(pattern, S, beta: float, J=None) -> np.ndarray:
    """Free correlation matrix of the model induced on S (rows in sorted order)."""
    S = sorted(int(s) for s in S)
    if len(S) == 1:
        return np.ones((1, 1))
    if len(S) <= oracle.MAX_SPIN_VERTICES:
        sg = oracle.SmallGraph.from_pattern(pattern, S, J)
        return oracle.spin_enumeration(sg, beta=beta).correlations
    sub = pattern.subpattern(S)
    n = len(S)
    C = np.eye(n)
    for i in range(n):
        for j in range(i + 1, n):
            C[i, j] = C[j, i] = kacward_two_point(sub, beta, i, j).value
    return C


def phi_all(pattern, beta: float, S, J=None) -> dict:
    """phi_{S,beta}(v) for every v in S."""
    S = sorted(int(s) for s in S)
    if not _induced_connected(pattern, S):
        raise ValueError("S does not induce a connected subgraph")
    flux = _outside_flux(pattern, S, beta, J)
    C = induced_correlations(pattern, S, beta, J)
    vals = C @ flux
    return {v: float(vals[i]) for i, v in enumerate(S)}


def phi(pattern, beta: float, S, v: int, J=None) -> float:
    if int(v) not in set(int(s) for s in S):
        raise ValueError("v must belong to S")
    return phi_all(pattern, beta, S, J)[int(v)]


def phi_lower_bound(pattern, v: int, epsilon: float | None = None) -> float:
    """sqrt(r/R) tan(eps/2) with r the largest neighbor radius and R the largest radius."""
    eps = pattern.angle_margin() if epsilon is None else epsilon
    r = pattern.neighbor_max_radius(v)
    return float(np.sqrt(r / pattern.max_radius) * np.tan(eps / 2))


def connected_sets(pattern, v: int, max_size: int, allowed=None) -> list[frozenset]:
    """All vertex sets containing v, inducing connected subgraphs, of size <= max_size."""
    adj = [set(int(b) for b in nb) for nb in pattern.graph.adjacency()]
    allowed = None if allowed is None else set(int(a) for a in allowed)
    v = int(v)
    if allowed is not None and v not in allowed:
        raise ValueError("v is not an allowed vertex")
    found = {frozenset([v])}
    layer = [frozenset([v])]
    for _ in range(max_size - 1):
        nxt = []
        for S in layer:
            border = set().union(*(adj[s] for s in S)) - S
            if allowed is not None:
                border &= allowed
            for b in border:
                T = S | {b}
                if T not in found:
                    found.add(T)
                    nxt.append(T)
        layer = nxt
    return sorted(found, key=lambda s: (len(s), sorted(s)))


def all_connected_sets(pattern, max_size: int, allowed) -> list[frozenset]:
    out = set()
    for v in allowed:
        out.update(connected_sets(pattern, v, max_size, allowed))
    return sorted(out, key=lambda s: (len(s), sorted(s)))


# -- plus-boundary magnetization ---------------------------------------------

def default_region(pattern) -> np.ndarray:
    return np.flatnonzero(~np.asarray(pattern.boundary))


@dataclass(frozen=True)
class MagnetizationResult:
    value: float
    method: str
    beta: float
    v: int
    stderr: float = 0.0
    ess: float = float("inf")
    seed: int | None = None


def magnetization_plus(pattern, beta: float, v: int, region=None, *, seed: int = 0,
                       sweeps: int = 20000, burn_in: int = 2000, min_ess: float = 100.0
                       ) -> MagnetizationResult:
    """<s_v> on ``region`` with plus boundary conditions from the rest of the pattern.

    Exact enumeration up to the spin-oracle limit, Metropolis otherwise.
    """
    region = default_region(pattern) if region is None else np.asarray(sorted(set(region)))
    local = {int(r): i for i, r in enumerate(region)}
    if int(v) not in local:
        raise ValueError("v is not in the region")
    sg = oracle.SmallGraph.from_pattern(pattern, region)
    if len(region) <= oracle.MAX_SPIN_VERTICES:
        res = oracle.spin_enumeration(sg, beta=beta, boundary="plus")
        return MagnetizationResult(float(res.magnetization[local[int(v)]]), "spin_oracle",
                                   float(beta), int(v))
    return metropolis_magnetization(sg, beta, local[int(v)], seed=seed, sweeps=sweeps,
                                    burn_in=burn_in, min_ess=min_ess, label=int(v))


def metropolis_magnetization(sg, beta: float, i: int, *, seed: int = 0, sweeps: int = 20000,
                             burn_in: int = 2000, min_ess: float = 100.0,
                             label: int | None = None) -> MagnetizationResult:
    """Single-site Metropolis estimate of <s_i> with batch-means error and ESS."""
    rng = np.random.default_rng(seed)
    g = sg.graph
    n = g.n_vertices
    nbrs = [g.neighbors(a) for a in range(n)]
    Jn = [sg.J[g.undirected[g.out_edges[a]]] for a in range(n)]
    h = sg.field if sg.field is not None else np.zeros(n)
    s = np.ones(n)
    samples = np.empty(sweeps)
    for t in range(burn_in + sweeps):
        for a in rng.permutation(n):
            local_field = Jn[a] @ s[nbrs[a]] + h[a]
            dE = 2.0 * beta * s[a] * local_field
            if dE <= 0 or rng.random() < np.exp(-dE):
                s[a] = -s[a]
        if t >= burn_in:
            samples[t - burn_in] = s[i]
    n_batches = 50
    batches = samples[: sweeps - sweeps % n_batches].reshape(n_batches, -1).mean(axis=1)
    stderr = float(batches.std(ddof=1) / np.sqrt(n_batches))
    var = samples.var()
    ess = float("inf") if stderr == 0 else float(var / stderr**2)
    if ess < min_ess:
        raise MonteCarloError(f"effective sample size {ess:.1f} below {min_ess}")
    return MagnetizationResult(float(samples.mean()), "metropolis", float(beta),
                               i if label is None else label, stderr, ess, seed)


# -- differential inequality -------------------------------------------------

@dataclass
class DiffIneqRow:
    beta: float
    magnetization: float
    derivative: float
    inf_phi: float
    rhs: float
    argmin: tuple
    t_v: float
    gronwall: float | None = None

    @property
    def slack(self) -> float:
        return self.derivative - self.rhs


@dataclass
class DiffIneqReport:
    v: int
    region: tuple
    n_sets: int
    rows: list = field(default_factory=list)

    @property
    def min_slack(self) -> float:
        return min(r.slack for r in self.rows)

    def passed(self, tol: float = 1e-6) -> bool:
        return self.min_slack >= -tol


def differential_inequality_check(pattern, v: int, betas, region=None, h: float = 1e-4,
                                  max_vertices: int = 10) -> DiffIneqReport:
    """Compare d/dbeta <s_v>^+ with (1/beta) inf_S phi_{S,beta}(v) (1 - m^2).

    The infimum runs over every connected S in the region containing v.
    For beta > 1 the value 1 - beta^(-t_v) is recorded for comparison only.
    """
    region = default_region(pattern) if region is None else np.asarray(sorted(set(region)))
    if len(region) > max_vertices:
        raise ValueError(f"region has {len(region)} vertices; exhaustive infimum needs "
                         f"<= {max_vertices}")
    sets = connected_sets(pattern, v, len(region), allowed=region)
    t_v = phi_lower_bound(pattern, v)
    report = DiffIneqReport(int(v), tuple(int(r) for r in region), len(sets))
    for beta in betas:
        m = magnetization_plus(pattern, beta, v, region).value
        mp = magnetization_plus(pattern, beta + h, v, region).value
        mm = magnetization_plus(pattern, beta - h, v, region).value
        deriv = (mp - mm) / (2 * h)
        best, arg = np.inf, ()
        for S in sets:
            val = phi(pattern, beta, S, v)
            if val < best:
                best, arg = val, tuple(sorted(S))
        rhs = best * (1 - m * m) / beta
        gw = 1 - beta ** (-t_v) if beta > 1 else None
        report.rows.append(DiffIneqRow(float(beta), m, deriv, best, rhs, arg, t_v, gw))
    return report


# -- decay and susceptibility ------------------------------------------------

@dataclass(frozen=True)
class DecayFit:
    beta: float
    rate: float
    intercept: float
    distances: np.ndarray
    correlations: np.ndarray
    epsilon: float
    max_degree: int

    def floor(self) -> np.ndarray:
        """Lower bound on -log correlation implied by the norm estimate."""
        d = self.distances
        eps, D = self.epsilon, self.max_degree
        return (d - 1) * (-np.log(eps)) - np.log(D**2 / (1 - eps))

    def floor_margin(self) -> np.ndarray:
        return -np.log(self.correlations) - self.floor()


def decay_rate_fit(pattern, beta: float, v: int, max_distance: int | None = None) -> DecayFit:
    """Least-squares slope of -log <s_u s_v> against graph distance.

    At each distance the largest correlation over the vertices at that
    distance is used.
    """
    if not 0 < beta < 1:
        raise ValueError("decay fits need 0 < beta < 1")
    dist = pattern.graph.bfs_distances(v)
    dmax = dist.max() if max_distance is None else min(max_distance, dist.max())
    ds, cs = [], []
    for d in range(1, dmax + 1):
        us = np.flatnonzero(dist == d)
        if len(us) == 0:
            continue
        vals = [kacward_two_point(pattern, beta, int(u), v).value for u in us]
        ds.append(d)
        cs.append(max(vals))
    if len(ds) < 3:
        raise ValueError("fewer than 3 distance points")
    ds, cs = np.asarray(ds, float), np.asarray(cs)
    slope, icpt = np.polyfit(ds, -np.log(cs), 1)
    eps = 1 - decay_constant(pattern) * (1 - beta)
    D = max(pattern.graph.degree(a) for a in range(pattern.n_vertices))
    return DecayFit(float(beta), float(slope), float(icpt), ds, cs, float(eps), int(D))


def finite_susceptibility(pattern, beta: float, v: int) -> float:
    """Sum of free two-point functions <s_u s_v> over the patch."""
    if beta == 0:
        return 1.0
    return float(correlation_row(pattern, beta, v).sum())
