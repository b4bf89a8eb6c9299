import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pattern_ising import sholo
from pattern_ising.pattern import half_edge_extension

from conftest import iso, stretched, triangulation

complexes = st.complex_numbers(max_magnitude=1e3, allow_nan=False, allow_infinity=False)
nonzero = st.complex_numbers(min_magnitude=1e-2, max_magnitude=1e2, allow_nan=False,
                             allow_infinity=False)


def _domains():
    p5 = iso(5)
    st6 = stretched((1.0, 1.6, 0.8, 1.3, 1.1, 0.9), 6)
    tri = triangulation(2, 4, 4)
    return [half_edge_extension(p5, p5.interior), half_edge_extension(st6, st6.interior),
            half_edge_extension(tri, tri.interior)]


DOMAINS = _domains()


@given(complexes, nonzero)
def test_projection_is_idempotent_and_on_line(z, eta):
    pz = sholo.project(z, eta)
    assert abs(sholo.project(pz, eta) - pz) <= 1e-9 * max(1.0, abs(z))
    lam = sholo.line_spanner(eta)
    assert abs(np.imag(np.conj(lam) * pz)) <= 1e-9 * max(1.0, abs(z))
    # opposite edges carry orthogonal lines, so the two projections rebuild z
    assert abs(pz + sholo.project(z, -eta) - z) <= 1e-9 * max(1.0, abs(z))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000))
def test_s_inverse_undoes_s(seed):
    bar = DOMAINS[seed % len(DOMAINS)]
    rng = np.random.default_rng(seed)
    f = rng.standard_normal(bar.graph.n_edges) + 1j * rng.standard_normal(bar.graph.n_edges)
    phi = sholo.s_operator(bar, f)
    assert np.max(sholo.line_residual(bar, phi)) <= 1e-12
    assert np.allclose(sholo.s_inverse(bar, phi), f, atol=1e-12)


@pytest.mark.parametrize("k", range(len(DOMAINS)))
@pytest.mark.parametrize("seed", [0, 1])
def test_bvp_solution_is_s_holomorphic(k, seed):
    bar = DOMAINS[k]
    sol = sholo.solve_bvp(bar, sholo.admissible_boundary(bar, seed=seed))
    d = sol.domain
    out = d.outward
    assert np.allclose(sholo.s_operator(d, sol.f)[out], sol.boundary_data[out], atol=1e-10)
    sc = sholo.scale_of(sol.f)
    for v in bar.interior:
        ok, res = sholo.is_sholomorphic(bar, sol.f, v)
        assert ok, res
        assert sholo.kacward_residual(d, sol.f, v) <= 1e-9 * sc
        assert abs(sholo.contour_check_f(d, sol.f, v)) <= 1e-9 * sc
        c2 = sholo.contour_check_f2(d, sol.f, v)
        assert abs(c2.real) <= 1e-9 * sc**2
        assert c2.imag >= -1e-9 * sc**2
        assert c2.identity_error <= 1e-10 * sc**2


def test_random_function_is_not_s_holomorphic():
    bar = DOMAINS[0]
    f = np.random.default_rng(5).standard_normal(bar.graph.n_edges) + 0j
    assert not any(sholo.is_sholomorphic(bar, f, v)[0] for v in bar.interior)


def test_edge_identities_hold_for_any_function():
    bar = DOMAINS[1]
    rng = np.random.default_rng(2)
    f = rng.standard_normal(bar.graph.n_edges) + 1j * rng.standard_normal(bar.graph.n_edges)
    re_err, im_err = sholo.edge_identity_residuals(bar, f)
    assert re_err <= 1e-12 and im_err <= 1e-12


@pytest.mark.parametrize("p", [iso(5), stretched((1.0, 1.6, 0.8, 1.3), 4), triangulation(2, 4, 4)])
def test_block_skew_symmetry(p):
    for v in p.interior:
        assert sholo.skew_symmetry_residual(p, v) <= 1e-12


@pytest.mark.parametrize("k", range(len(DOMAINS)))
def test_zeta_recovers_rho(k):
    bar = DOMAINS[k]
    d = sholo.Domain.of(bar)
    zeta = sholo.zeta_boundary(bar)
    is_out = np.zeros(d.graph.n_directed, dtype=bool)
    is_out[d.outward] = True
    assert np.allclose(zeta[is_out], d.rho[is_out], atol=1e-12)
    assert np.max(np.abs(zeta[~is_out])) <= 1e-12
    sol = sholo.solve_bvp(bar, zeta, check_lines=False)
    assert np.max(np.abs(sol.phi - d.rho)) <= 1e-9


def test_bvp_rejects_bad_data():
    bar = DOMAINS[0]
    phi = sholo.admissible_boundary(bar, seed=0)
    off = phi.copy()
    off[bar.outward[0]] *= 1j
    with pytest.raises(sholo.SholoError, match="off its line"):
        sholo.solve_bvp(bar, off)
    stray = phi.copy()
    inner = np.setdiff1d(np.arange(bar.graph.n_directed), bar.outward)[0]
    stray[inner] = 1.0
    with pytest.raises(sholo.SholoError, match="non-boundary"):
        sholo.solve_bvp(bar, stray)
    with pytest.raises(sholo.SholoError):
        sholo.solve_bvp(bar, phi[:-1])
    with pytest.raises(sholo.SholoError):
        sholo.solve_bvp(iso(4), np.zeros(iso(4).graph.n_directed))


def test_boundary_vertex_is_rejected():
    bar = DOMAINS[0]
    f = np.zeros(bar.graph.n_edges, dtype=complex)
    with pytest.raises(sholo.SholoError, match="not interior"):
        sholo.is_sholomorphic(bar, f, bar.graph.n_vertices - 1)


def test_problem_json_round_trip():
    p = iso(5)
    bar = DOMAINS[0]
    phi = sholo.admissible_boundary(bar, seed=4)
    text = sholo.bvp_problem_json(p, p.interior, phi)
    bar2, phi2 = sholo.bvp_problem_from_json(p, text)
    assert np.array_equal(bar2.region, bar.region)
    assert np.allclose(phi2, phi)
    with pytest.raises(sholo.SholoError):
        sholo.bvp_problem_from_json(iso(4), text)
