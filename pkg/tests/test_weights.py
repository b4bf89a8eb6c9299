import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pattern_ising.pattern import generate_stretched_square
from pattern_ising.weights import (beta_deformed_weights, coupling_ratio, critical_couplings,
                                   critical_directed_weights, decay_constant, defect_curve,
                                   defect_signs)

from conftest import iso, stretched, triangulation

J_SQUARE = -0.5 * np.log(np.sqrt(2) - 1)

heights = st.lists(st.floats(0.3, 3.0), min_size=2, max_size=5)
betas = st.floats(0.05, 2.0)


def test_isoradial_square_critical_value():
    J = critical_couplings(iso(4))
    assert np.max(np.abs(J - J_SQUARE)) <= 1e-12
    assert J_SQUARE == pytest.approx(0.44068679350977147, abs=1e-15)


@settings(max_examples=25, deadline=None)
@given(heights)
def test_coupling_factorizes_half_angles(h):
    p = generate_stretched_square(h, 3)
    g = p.graph
    J = critical_couplings(p)
    x = critical_directed_weights(p)
    assert np.allclose(x.values**2, np.tan(p.half_angles / 2), atol=1e-15)
    assert np.allclose(x.undirected(g), np.tanh(J), atol=1e-14)
    assert np.all(J > 0)


@settings(max_examples=25, deadline=None)
@given(heights, betas)
def test_deformed_weights_factorize_tanh_beta_j(h, beta):
    p = generate_stretched_square(h, 3)
    w = beta_deformed_weights(p, beta)
    J = critical_couplings(p)
    assert np.allclose(w.undirected(p.graph), np.tanh(beta * J), atol=1e-14)
    # the geometric ratio x_e / x_{-e} does not depend on beta
    c = critical_directed_weights(p).values
    g = p.graph
    assert np.allclose(w.values / w.values[g.reverse], c / c[g.reverse], atol=1e-12)


def test_deformed_weights_endpoints_and_monotonicity(st4):
    crit = critical_directed_weights(st4).values
    assert np.allclose(beta_deformed_weights(st4, 1.0).values, crit, atol=1e-15)
    assert np.all(beta_deformed_weights(st4, 0.0).values == 0)
    prev = 0.0
    for b in (0.2, 0.5, 0.9, 1.3):
        cur = beta_deformed_weights(st4, b).values
        assert np.all(cur > prev)
        prev = cur
    with pytest.raises(ValueError):
        beta_deformed_weights(st4, -0.1)


@given(st.floats(0.0, 1.0), st.floats(0.01, 3.0))
def test_coupling_ratio_bounds(beta, J):
    s = coupling_ratio(beta, J)
    assert -1e-15 <= s <= 1 + 1e-12
    assert s >= beta - 1e-12  # tanh is concave on [0, inf)


def test_decay_constant():
    c = decay_constant(iso(4))
    M = J_SQUARE
    assert c == pytest.approx(2 * M / np.sinh(2 * M), rel=1e-15)
    assert 0 < c < 1
    assert decay_constant(stretched((1.0, 3.0), 3)) < c  # longer edges, stronger coupling


@pytest.mark.parametrize("p", [iso(4), stretched((1.0, 1.6, 0.8, 1.3), 4), triangulation(3)])
def test_defect_signs_flip_exactly_on_crossed_edges(p):
    g = p.graph
    for u, v in [(0, p.n_vertices - 1), (1, p.n_vertices // 2)]:
        c = defect_curve(p, u, v)
        prod = c.tau * c.tau[g.reverse]
        crossed = np.zeros(p.n_edges, dtype=bool)
        crossed[list(c.crossed)] = True
        assert np.all((prod < 0) == crossed[g.undirected])
        assert np.all(np.abs(c.tau) == 1)
        assert c.corners[0] in set(p.face_corners(u).tolist())
        assert c.corners[-1] in set(p.face_corners(v).tolist())
        assert np.array_equal(defect_signs(p, u, v), c.tau)


def test_defect_curve_alternatives_and_errors(sq4):
    c1 = defect_curve(sq4, 0, 15)
    c2 = defect_curve(sq4, 0, 15, blocked=c1.crossed[:1])
    assert c1.fingerprint() != c2.fingerprint()
    assert defect_curve(sq4, 0, 15).fingerprint() == c1.fingerprint()
    with pytest.raises(ValueError):
        defect_curve(sq4, 3, 3)


@pytest.mark.parametrize("h", [(1.0, 2.0), (1.0, 2.0, 1.0), (1.0, 1.6, 0.8, 1.3)])
def test_stretched_columns_coupling_relation(h):
    # horizontal coupling between columns i, i+1 satisfies tanh J = exp(-J_i - J_{i+1})
    p = stretched(h, 3)
    J = critical_couplings(p)
    col = np.round(p.centers.real, 9)
    d = p.centers[p.edges[:, 1]] - p.centers[p.edges[:, 0]]
    horiz = np.abs(d.imag) < 1e-9
    vert = {col[p.edges[k, 0]]: J[k] for k in np.flatnonzero(~horiz)}
    for k in np.flatnonzero(horiz):
        a, b = col[p.edges[k]]
        assert np.tanh(J[k]) == pytest.approx(np.exp(-vert[a] - vert[b]), abs=1e-12)
