import dataclasses

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pattern_ising import kacward as kw
from pattern_ising.graph import EmbeddedGraph
from pattern_ising.oracle import even_subgraph_partition
from pattern_ising.weights import (WeightVector, beta_deformed_weights,
                                   critical_directed_weights, decay_constant)

from conftest import iso, random_directed_weights, random_planar_graph, stretched, triangulation

SQUARE = EmbeddedGraph(np.array([0, 1, 1 + 1j, 1j]), np.array([(0, 1), (1, 2), (2, 3), (3, 0)]))


def test_four_cycle_closed_form():
    # one loop: Z = 1 + prod x, and T factorizes into two such determinants
    x = np.array([0.3, 0.5, 0.7, 0.2, 0.9, 0.4, 0.6, 0.8])
    s = kw.build_system(SQUARE, x)
    w = WeightVector(x).undirected(SQUARE)
    assert s.det() == pytest.approx((1 + np.prod(w)) ** 2, rel=1e-13)
    assert kw.partition_function(s) == pytest.approx(1 + np.prod(w), rel=1e-13)
    assert kw.log_partition_function(s) == pytest.approx(np.log1p(np.prod(w)), rel=1e-13)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 100_000), st.integers(4, 16))
def test_determinant_is_squared_partition_function(seed, m):
    sg = random_planar_graph(seed, max_edges=m)
    x = random_directed_weights(sg.graph, seed)
    s = kw.build_system(sg.graph, x)
    z = even_subgraph_partition(sg, WeightVector(x).undirected(sg.graph))
    det = s.det()
    assert abs(z * z - det) / abs(det) <= 1e-9


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 100_000))
def test_reversal_conjugate_is_hermitian(seed):
    sg = random_planar_graph(seed)
    s = kw.build_system(sg.graph, random_directed_weights(sg.graph, seed))
    JL = s.conjugated()
    assert np.max(np.abs(JL - JL.conj().T)) <= 1e-14
    # J Lambda only couples edges leaving the same vertex
    r, c = np.nonzero(JL)
    assert np.all(sg.graph.tail[r] == sg.graph.tail[c])


def test_dense_and_sparse_paths_agree():
    p = iso(6)
    w = beta_deformed_weights(p, 0.9)
    s = kw.build_system(p, w)
    assert not s.dense
    sign, logabs = np.linalg.slogdet(s.T_dense())
    phase, mine = s.slogdet()
    assert mine == pytest.approx(logabs, rel=1e-12)
    assert abs(phase - sign) <= 1e-10
    rhs = np.random.default_rng(1).standard_normal(s.n) + 0j
    y = s.solve(rhs)
    assert np.max(np.abs(s.T_dense() @ y - rhs)) <= 1e-10
    y2 = kw.solve(s, rhs)
    assert np.allclose(y, y2)


def test_inverse_matches_numpy(st4):
    s = kw.build_system(st4, critical_directed_weights(st4))
    assert s.dense
    assert np.allclose(s.inverse(), np.linalg.inv(s.T_dense()), atol=1e-12)


def test_index_mismatch_rejected(sq3):
    with pytest.raises(ValueError, match="index mismatch"):
        kw.build_system(sq3, np.ones(5))


def test_singular_system_is_an_error():
    # a single loop of weight -1 gives Z = 0
    x = np.ones(8)
    x[0] = -1.0
    s = kw.build_system(SQUARE, x)
    assert abs(s.det()) <= 1e-12
    with pytest.raises(kw.SingularSystemError):
        s.solve(np.ones(8))


def test_export_coo(tmp_path, sq3):
    s = kw.build_system(sq3, critical_directed_weights(sq3))
    text = s.export_coo(tmp_path / "t.coo")
    rows = [line.split() for line in text.splitlines()]
    assert len(rows) == s.T().nnz
    assert (tmp_path / "t.coo").read_text() == text
    assert s.fingerprint() == kw.build_system(sq3, critical_directed_weights(sq3)).fingerprint()


# -- vertex blocks -------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.integers(0, 100_000), st.integers(2, 7))
def test_block_norm_root_matches_svd(seed, k):
    rng = np.random.default_rng(seed)
    ang = np.sort(rng.uniform(0, 2 * np.pi, k))
    x = rng.uniform(0.2, 1.5, k)
    B = kw.block_from_weights(np.exp(1j * ang), x)
    assert abs(kw.block_norm_bisection(x**2) - kw.block_norm_svd(B)) <= 1e-9


def test_bisection_degenerate_inputs():
    assert kw.block_norm_bisection([0.5]) is None
    assert kw.block_norm_bisection([0.5, 0.0]) is None
    # two edges: arctan(a/s) + arctan(b/s) = pi/2 gives s^2 = a b
    assert kw.block_norm_bisection([0.25, 4.0]) == pytest.approx(1.0, abs=1e-11)


@pytest.mark.parametrize("p", [iso(5), stretched((1.0, 1.6, 0.8, 1.3), 4), triangulation(0, 4, 4)])
def test_critical_interior_blocks_have_norm_one(p):
    w = critical_directed_weights(p)
    for v in p.interior:
        assert kw.block_operator_norm(p, w, v) == pytest.approx(1.0, abs=1e-10)


@pytest.mark.parametrize("beta", [0.0, 0.5, 0.8, 0.95, 1.0])
def test_global_norm_bound(beta):
    p = stretched((1.0, 1.6, 0.8, 1.3), 4)
    nrm = kw.global_norm_bound(p, beta)
    assert nrm <= 1 - decay_constant(p) * (1 - beta) + 1e-9
    with pytest.raises(ValueError):
        kw.global_norm_bound(p, 1.2)


def test_global_norm_bound_raises_on_violation(sq4):
    with pytest.raises(kw.BoundViolation):
        kw.global_norm_bound(sq4, 0.5, slack=-1.0)


# -- critical eigenvector ------------------------------------------------------

@pytest.mark.parametrize("p", [iso(6), stretched((1.0, 2.0, 0.7, 1.4), 4), triangulation(2, 5, 4)])
def test_critical_eigenvector(p):
    ev, res = kw.critical_eigenvector(p)
    assert res <= 1e-11
    assert np.all(ev.rho > 0)
    assert np.allclose(ev.rho, ev.rho[p.graph.reverse])


def test_eigenvector_negative_control():
    p = iso(6)
    q = dataclasses.replace(p, radii=p.radii * 1.01)
    assert kw.critical_eigenvector(q)[1] > 1e-3
    # a single interior radius, angles recomputed from the stale chords
    r = p.radii.copy()
    r[14] *= 1.01
    assert kw.critical_eigenvector(dataclasses.replace(p, radii=r))[1] > 1e-3
