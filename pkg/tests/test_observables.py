import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pattern_ising import observables as obs
from pattern_ising import oracle
from pattern_ising.weights import defect_curve

from conftest import iso, stretched, triangulation

ST4 = stretched((1.0, 1.6, 0.8, 1.3), 4)


@pytest.mark.parametrize("p", [iso(3), ST4, triangulation(3)])
def test_kacward_matches_spin_enumeration(p):
    beta = 0.9
    s = oracle.spin_enumeration(oracle.SmallGraph.from_pattern(p), beta=beta)
    for u in range(p.n_vertices):
        for v in range(u + 1, p.n_vertices):
            assert obs.kacward_two_point(p, beta, u, v).value == pytest.approx(
                s.two_point(u, v), abs=1e-9)


@settings(max_examples=25, deadline=None)
@given(st.floats(0.05, 2.0), st.integers(0, 15), st.integers(0, 15))
def test_kacward_matches_spins_random_pairs(beta, u, v):
    s = oracle.spin_enumeration(oracle.SmallGraph.from_pattern(ST4), beta=beta)
    assert obs.kacward_two_point(ST4, beta, u, v).value == pytest.approx(s.two_point(u, v),
                                                                          abs=1e-9)


def test_frozen_square_value():
    assert obs.kacward_two_point(iso(3), 1.0, 0, 8).value == pytest.approx(0.176592903758,
                                                                         abs=1e-11)


def test_methods_agree_and_unknown_method(sq3):
    vals = [obs.two_point(sq3, 0.7, 1, 5, m).value for m in obs.METHODS]
    assert max(vals) - min(vals) <= 1e-12
    with pytest.raises(ValueError):
        obs.two_point(sq3, 0.7, 1, 5, "transfer")


def test_trivial_cases(sq3):
    assert obs.kacward_two_point(sq3, 0.8, 4, 4).value == 1.0
    assert obs.kacward_two_point(sq3, 0.0, 0, 8).value == 0.0
    with pytest.raises(ValueError):
        obs.kacward_two_point(sq3, -0.1, 0, 8)


@pytest.mark.parametrize("p", [iso(4), ST4, triangulation(3)])
def test_defect_gauge_invariance(p):
    u, v = 0, p.n_vertices - 1
    c1 = defect_curve(p, u, v)
    c2 = defect_curve(p, u, v, blocked=c1.crossed[:1])
    assert c1.fingerprint() != c2.fingerprint()
    a = obs.kacward_two_point(p, 0.8, u, v, curve=c1).value
    b = obs.kacward_two_point(p, 0.8, u, v, curve=c2).value
    assert abs(a - b) <= 1e-10


def test_griffiths_monotonicity():
    p = ST4
    prev = np.zeros(p.n_vertices)
    for beta in (0.2, 0.5, 0.9, 1.3):
        row = obs.correlation_row(p, beta, 5)
        assert np.all(row >= prev - 1e-12)
        assert np.all((row > 0) & (row <= 1 + 1e-12))
        prev = row


# -- correlation bounds --------------------------------------------------------

@pytest.mark.parametrize("p", [iso(4), ST4, triangulation(3)])
@pytest.mark.parametrize("beta", [0.3, 1.0])
def test_correlation_sandwich(p, beta):
    for u in range(p.n_vertices):
        for v in range(p.n_vertices):
            if u != v:
                b = obs.correlation_bounds(p, beta, u, v)
                assert b.lower_slack >= -1e-10
                assert b.upper_slack >= -1e-10


def test_stated_upper_form_is_not_a_bound():
    # summing over In_u x Out_v misses the terms that carry the correlation
    p = iso(4)
    worst = min(obs.correlation_bounds(p, 1.0, u, v).upper_stated
                - obs.kacward_two_point(p, 1.0, u, v).value
                for u in range(16) for v in range(16) if u != v)
    assert worst < -0.1


def test_bounds_check_raises_with_artifact(sq3):
    with pytest.raises(obs.BoundViolationError) as info:
        obs.correlation_bounds_check(sq3, 0.8, 0, 8, slack=10.0)
    art = info.value.artifact
    assert set(art) >= {"T", "T_inv", "bounds"}
    assert len(art["T"]) == sq3.graph.n_directed


# -- phi and connected sets ---------------------------------------------------

def test_connected_sets_of_four_cycle():
    p = iso(4)
    sets = obs.connected_sets(p, 5, 4, allowed=p.interior)
    assert len(sets) == 7
    assert all(5 in S for S in sets)
    assert len(obs.all_connected_sets(p, 4, p.interior)) == 4 + 4 + 4 + 1


def test_phi_single_vertex_is_outside_flux():
    p = iso(4)
    J = -0.5 * np.log(np.sqrt(2) - 1)
    assert obs.phi(p, 1.0, [5], 5) == pytest.approx(4 * np.tanh(J), rel=1e-14)
    with pytest.raises(ValueError):
        obs.phi(p, 1.0, [5, 10], 5)  # diagonal pair is not connected
    with pytest.raises(ValueError):
        obs.phi(p, 1.0, [5, 6], 9)


@pytest.mark.parametrize("p", [iso(5), stretched((1.0, 1.6, 0.8, 1.3, 1.1), 5)])
def test_phi_lower_bound(p):
    region = p.interior
    for S in obs.all_connected_sets(p, 5, region):
        for v, val in obs.phi_all(p, 1.0, S).items():
            assert val >= obs.phi_lower_bound(p, v) - 1e-10


def test_phi_bound_fails_away_from_criticality():
    # the bound is a beta = 1 statement; at beta = 0.2 it is violated
    p = iso(4)
    worst = min(val - obs.phi_lower_bound(p, v)
                for S in obs.all_connected_sets(p, 4, p.interior)
                for v, val in obs.phi_all(p, 0.2, S).items())
    assert worst < 0


def test_phi_lower_bound_value():
    p = iso(4)
    assert obs.phi_lower_bound(p, 5) == pytest.approx(np.tan(np.pi / 8), rel=1e-12)


def test_induced_correlations_fallback_agrees():
    p = iso(6)
    S = list(p.interior)  # 16 vertices: spin enumeration path
    C = obs.induced_correlations(p, S, 0.9)
    sub = p.subpattern(S)
    assert obs.kacward_two_point(sub, 0.9, 0, 15).value == pytest.approx(C[0, 15], abs=1e-10)


# -- magnetization and the differential inequality ------------------------------

def test_plus_magnetization_exact_and_monotone():
    p = iso(5)
    ms = [obs.magnetization_plus(p, b, 12).value for b in (0.3, 0.6, 1.0, 1.5)]
    assert all(0 < m < 1 for m in ms)
    assert np.all(np.diff(ms) > 0)


def test_metropolis_agrees_with_enumeration():
    p = iso(4)
    sg = oracle.SmallGraph.from_pattern(p, p.interior)
    exact = oracle.spin_enumeration(sg, beta=0.5, boundary="plus").magnetization[0]
    mc = obs.metropolis_magnetization(sg, 0.5, 0, seed=3, sweeps=20000, burn_in=500)
    assert abs(mc.value - exact) <= 5 * mc.stderr + 1e-3
    assert mc.ess >= 100


def test_differential_inequality():
    p = iso(5)
    rep = obs.differential_inequality_check(p, 12, [0.5, 1.0, 1.5])
    assert rep.passed()
    assert rep.n_sets > 9
    assert rep.rows[-1].gronwall is not None and rep.rows[0].gronwall is None
    with pytest.raises(ValueError):
        obs.differential_inequality_check(iso(6), 14, [1.0])


# -- decay and susceptibility ------------------------------------------------

def test_decay_fit_on_strip():
    p = stretched((1.0, 1.6, 0.8, 1.3, 1.0, 0.7, 1.5, 1.1), 4)
    rates = []
    for beta in (0.6, 0.9):
        fit = obs.decay_rate_fit(p, beta, 1)
        assert np.all(fit.floor_margin() > 0)
        rates.append(fit.rate)
    assert rates[0] > rates[1] > 0
    with pytest.raises(ValueError):
        obs.decay_rate_fit(p, 1.0, 1)


def test_finite_susceptibility(sq4):
    assert obs.finite_susceptibility(sq4, 0.0, 5) == 1.0
    chis = [obs.finite_susceptibility(sq4, b, 5) for b in (0.3, 0.8, 1.2)]
    assert np.all(np.diff(chis) > 0)
    assert chis[-1] <= sq4.n_vertices
