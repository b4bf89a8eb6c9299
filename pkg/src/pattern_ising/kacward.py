"""Kac-Ward transition matrix, determinant, solver and per-vertex blocks."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .graph import EmbeddedGraph, turning_angle
from .weights import (WeightVector, beta_deformed_weights, critical_couplings,
                      critical_directed_weights, decay_constant)

DENSE_LIMIT = 64
BISECTION_TOL = 1e-12
BISECTION_MAXITER = 200


class KacWardError(RuntimeError):
    pass


class SingularSystemError(KacWardError):
    def __init__(self, smallest_pivot):
        self.smallest_pivot = float(smallest_pivot)
        super().__init__(f"Kac-Ward matrix is singular (smallest pivot {smallest_pivot:.3e})")


class BoundViolation(KacWardError):
    pass


def _graph_of(obj) -> EmbeddedGraph:
    return obj if isinstance(obj, EmbeddedGraph) else obj.graph


def _values(weights) -> np.ndarray:
    if isinstance(weights, WeightVector):
        return np.asarray(weights.values, dtype=float)
    return np.asarray(weights, dtype=float)


def transition_entries(graph: EmbeddedGraph, x: np.ndarray):
    """Row, column and value arrays of the nonzero transitions."""
    d = graph.direction()
    rows, cols, vals = [], [], []
    for w in range(graph.n_vertices):
        ins = graph.in_edges[w]
        outs = graph.out_edges[w]
        if len(ins) == 0:
            continue
        e, gg = np.meshgrid(ins, outs, indexing="ij")
        e, gg = e.ravel(), gg.ravel()
        keep = gg != graph.reverse[e]
        e, gg = e[keep], gg[keep]
        phase = np.exp(0.5j * turning_angle(d[e], d[gg]))
        rows.append(e)
        cols.append(gg)
        vals.append(x[graph.reverse[e]] * x[gg] * phase)
    if not rows:
        return np.zeros(0, int), np.zeros(0, int), np.zeros(0, complex)
    return np.concatenate(rows), np.concatenate(cols), np.concatenate(vals)


class KacWardSystem:
    """Transition matrix Lambda and Kac-Ward matrix T = Id - Lambda.

    Factorizations are computed lazily and cached; dense LAPACK below
    ``DENSE_LIMIT`` directed edges, sparse SuperLU above.
    """

    def __init__(self, graph: EmbeddedGraph, x: np.ndarray, source=None):
        self.graph = graph
        self.x = np.asarray(x, dtype=float)
        if self.x.shape != (graph.n_directed,):
            raise ValueError(f"weights have shape {self.x.shape}, expected "
                             f"({graph.n_directed},)")
        self.source = source
        r, c, v = transition_entries(graph, self.x)
        n = graph.n_directed
        lam = sp.csr_matrix((v, (r, c)), shape=(n, n), dtype=complex)
        lam.eliminate_zeros()
        self.lam = lam
        self._lu = None

    @property
    def n(self) -> int:
        return self.graph.n_directed

    @property
    def dense(self) -> bool:
        return self.n < DENSE_LIMIT

    def T(self):
        return (sp.identity(self.n, dtype=complex, format="csc") - self.lam.tocsc()).tocsc()

    def T_dense(self) -> np.ndarray:
        return np.eye(self.n, dtype=complex) - self.lam.toarray()

    def reversal(self):
        """Permutation matrix J of the reversal involution."""
        n = self.n
        return sp.csr_matrix((np.ones(n), (np.arange(n), self.graph.reverse)), shape=(n, n))

    def conjugated(self) -> np.ndarray:
        """Dense J Lambda; Hermitian and block-diagonal over vertices."""
        return (self.reversal() @ self.lam).toarray()

    # -- factorization ---------------------------------------------------

    def _factor(self):
        if self._lu is not None:
            return self._lu
        if self.n == 0:
            self._lu = ("dense", None, np.zeros(0, complex))
        elif self.dense:
            lu, piv = sla.lu_factor(self.T_dense(), check_finite=False)
            self._lu = ("dense", (lu, piv), np.diag(lu))
        else:
            try:
                slu = spla.splu(self.T(), permc_spec="COLAMD")
            except RuntimeError as exc:  # exactly singular
                raise SingularSystemError(0.0) from exc
            self._lu = ("sparse", slu, slu.U.diagonal())
        return self._lu

    def pivots(self) -> np.ndarray:
        return self._factor()[2]

    def check_pivots(self, rel: float = 1e-14):
        piv = np.abs(self.pivots())
        if piv.size and piv.min() <= rel * max(piv.max(), 1.0):
            raise SingularSystemError(piv.min())

    def slogdet(self) -> tuple[complex, float]:
        """(phase, log|det T|) with phase a unit complex number."""
        kind, fac, diag = self._factor()
        if self.n == 0:
            return 1.0 + 0j, 0.0
        if np.any(diag == 0):
            return 0j, -np.inf
        phase = np.prod(diag / np.abs(diag))
        logabs = float(np.sum(np.log(np.abs(diag))))
        if kind == "dense":
            piv = fac[1]
            swaps = int(np.sum(piv != np.arange(len(piv))))
            phase *= (-1) ** swaps
        else:
            phase *= _perm_sign(fac.perm_r) * _perm_sign(fac.perm_c)
        return complex(phase), logabs

    def det(self) -> complex:
        phase, logabs = self.slogdet()
        return phase * np.exp(logabs)

    def solve(self, rhs) -> np.ndarray:
        rhs = np.asarray(rhs, dtype=complex)
        self.check_pivots()
        kind, fac, _ = self._factor()
        if kind == "dense":
            return sla.lu_solve(fac, rhs, check_finite=False)
        return fac.solve(rhs)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.n, dtype=complex))

    def fingerprint(self) -> str:
        h = hashlib.sha256()
        h.update(np.ascontiguousarray(self.graph.positions).tobytes())
        h.update(np.ascontiguousarray(self.graph.edges).tobytes())
        h.update(np.ascontiguousarray(self.x).tobytes())
        return h.hexdigest()

    def export_coo(self, path=None, matrix: str = "T") -> str:
        """Coordinate text ``row col re im`` of T (or Lambda)."""
        m = (self.T() if matrix == "T" else self.lam).tocoo()
        order = np.lexsort((m.col, m.row))
        lines = [f"{m.row[i]} {m.col[i]} {m.data[i].real:.17g} {m.data[i].imag:.17g}"
                 for i in order]
        text = "\n".join(lines) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


def _perm_sign(perm) -> int:
    perm = np.asarray(perm)
    seen = np.zeros(len(perm), dtype=bool)
    sign = 1
    for i in range(len(perm)):
        if seen[i]:
            continue
        j, length = i, 0
        while not seen[j]:
            seen[j] = True
            j = perm[j]
            length += 1
        if length % 2 == 0:
            sign = -sign
    return sign


def build_system(pattern, weights) -> KacWardSystem:
    """Kac-Ward system of a pattern (or any embedded graph) with directed weights."""
    graph = _graph_of(pattern)
    x = _values(weights)
    if x.shape != (graph.n_directed,):
        raise ValueError(f"index mismatch: {x.shape[0]} weights for "
                         f"{graph.n_directed} directed edges")
    return KacWardSystem(graph, x, source=pattern)


def partition_function(system: KacWardSystem, rel_tol: float = 1e-9) -> float:
    """Z = sqrt(det T), the positive root of a real positive determinant."""
    d = system.det()
    if abs(d.imag) > rel_tol * abs(d) or d.real <= 0:
        raise KacWardError(f"det T = {d} is not real positive")
    return float(np.sqrt(d.real))


def log_partition_function(system: KacWardSystem, rel_tol: float = 1e-9) -> float:
    phase, logabs = system.slogdet()
    if abs(phase.imag) > rel_tol or phase.real <= 0:
        raise KacWardError(f"det T has phase {phase}; expected +1")
    return 0.5 * logabs


def solve(system: KacWardSystem, rhs, rel_tol: float = 1e-10) -> np.ndarray:
    """Solve T y = rhs, checking the relative residual."""
    rhs = np.asarray(rhs, dtype=complex)
    y = system.solve(rhs)
    T = system.T()
    res = np.linalg.norm(T @ y - rhs)
    scale = max(np.linalg.norm(rhs), np.finfo(float).tiny)
    if np.linalg.norm(rhs) > 0 and res > rel_tol * scale:
        raise KacWardError(f"residual {res / scale:.3e} exceeds {rel_tol:g}")
    return y


# -- vertex blocks and norms -------------------------------------------------

def block_from_weights(directions, x) -> np.ndarray:
    """Block x_e x_g exp(i/2 angle(-e, g)) over the edges leaving one vertex."""
    d = np.asarray(directions, dtype=complex)
    x = np.asarray(x, dtype=float)
    k = len(d)
    B = np.zeros((k, k), dtype=complex)
    for a in range(k):
        for b in range(k):
            if a != b:
                B[a, b] = x[a] * x[b] * np.exp(0.5j * turning_angle(-d[a], d[b]))
    return B


def vertex_block(system: KacWardSystem, v: int) -> np.ndarray:
    out = system.graph.out_edges[v]
    return block_from_weights(system.graph.direction(out), system.x[out])


def block_norm_bisection(x_sq) -> float | None:
    """Positive root s of sum(arctan(x^2 / s)) = pi/2, or None if there is none."""
    x_sq = np.asarray(x_sq, dtype=float)
    if len(x_sq) < 2 or np.any(x_sq <= 0):
        return None

    def f(s):
        return float(np.sum(np.arctan(x_sq / s))) - np.pi / 2

    lo, hi = 0.0, float(x_sq.sum() * len(x_sq))
    for _ in range(BISECTION_MAXITER):
        mid = 0.5 * (lo + hi)
        if f(mid) > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= BISECTION_TOL:
            break
    return 0.5 * (lo + hi)


def block_norm_svd(block) -> float:
    block = np.asarray(block)
    if block.size == 0:
        return 0.0
    return float(np.linalg.norm(block, 2))


def block_operator_norm(pattern, weights, v: int, check: float = 1e-9) -> float:
    """Operator norm of the block at ``v``.

    The analytic root is cross-checked against the dense SVD; on the pattern
    boundary, or where no root exists, the SVD value is returned.
    """
    graph = _graph_of(pattern)
    x = _values(weights)
    out = graph.out_edges[v]
    block = block_from_weights(graph.direction(out), x[out])
    svd = block_norm_svd(block)
    s = block_norm_bisection(x[out] ** 2)
    boundary = getattr(pattern, "boundary", None)
    on_boundary = boundary is not None and bool(np.asarray(boundary)[v])
    if s is None or on_boundary:
        return svd
    if abs(s - svd) > check * max(1.0, svd):
        raise KacWardError(f"block norm mismatch at vertex {v}: bisection {s!r} vs SVD {svd!r}")
    return s


def global_norm_bound(pattern, beta: float, slack: float = 1e-9) -> float:
    """Max block norm with beta-deformed weights; checked against 1 - c(1 - beta)."""
    if not 0.0 <= beta <= 1.0:
        raise ValueError("beta must lie in [0, 1]")
    w = beta_deformed_weights(pattern, beta)
    norm = max(block_operator_norm(pattern, w, v) for v in range(pattern.n_vertices))
    c = decay_constant(pattern)
    if norm > 1 - c * (1 - beta) + slack:
        raise BoundViolation(f"norm {norm} exceeds 1 - c(1 - beta) = {1 - c * (1 - beta)}")
    return norm


# -- critical eigenvector ----------------------------------------------------

@dataclass(frozen=True)
class CriticalEigenvector:
    rho: np.ndarray


def critical_rho(pattern) -> np.ndarray:
    return np.sqrt(pattern.chord_lengths)[pattern.graph.undirected]


def eigenvector_residual(pattern, rho, x) -> float:
    """max |(Lambda rho - rho)_e| / max|rho| over edges into interior vertices."""
    system = build_system(pattern, x)
    r = system.lam @ rho - rho
    into_interior = ~np.asarray(pattern.boundary)[pattern.graph.head]
    if not into_interior.any():
        return 0.0
    return float(np.max(np.abs(r[into_interior])) / np.max(np.abs(rho)))


def critical_eigenvector(pattern) -> tuple[CriticalEigenvector, float]:
    rho = critical_rho(pattern)
    res = eigenvector_residual(pattern, rho, critical_directed_weights(pattern))
    return CriticalEigenvector(rho), res


__all__ = [
    "KacWardSystem", "KacWardError", "SingularSystemError", "BoundViolation",
    "build_system", "partition_function", "log_partition_function", "solve",
    "vertex_block", "block_from_weights", "block_norm_bisection", "block_norm_svd",
    "block_operator_norm", "global_norm_bound", "CriticalEigenvector",
    "critical_rho", "critical_eigenvector", "eigenvector_residual",
    "critical_couplings", "turning_angle",
]
