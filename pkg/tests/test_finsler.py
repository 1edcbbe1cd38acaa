import numpy as np
import pytest
from scipy.integrate import solve_ivp

from qtraj import potentials
from qtraj.errors import ConfigError, DegenerateMetricError
from qtraj.finsler import (ExtendedState, GaugeShift, GeneralizedQ, cartan_tensor, check_admissibility,
                           christoffel, connections, constant_q, curvatures, free_gaussian_q, lambda_fn,
                           metric, metric_finite_difference, nonlinear_connection, path_at_times,
                           run_geodesic, wave_q)
from qtraj.finsler.geometry import bordered_hessian, printed_bordered_matrix


def random_state(rng, n=2):
    q = rng.uniform(-3, 3, n)
    qdot = rng.uniform(0.3, 1.5, n) * rng.choice([-1, 1], n)
    return ExtendedState.from_parts(rng.uniform(0, 2), q, qdot, rng.uniform(0.9, 1.1))


@pytest.mark.parametrize("seed", range(5))
def test_metric_identities(seed):
    rng = np.random.default_rng(seed)
    oracle = wave_q(2, seed=seed)
    st = random_state(rng)
    me = metric(st, oracle)
    L = lambda_fn(st, oracle)
    assert me.Lambda == pytest.approx(L, rel=1e-14)
    assert st.y @ me.g @ st.y == pytest.approx(L**2, rel=1e-10)
    assert np.max(np.abs(np.einsum("abc,c->ab", cartan_tensor(st), st.y))) < 1e-10
    fd = metric_finite_difference(st, oracle)
    assert np.max(np.abs(fd - me.g)) / np.max(np.abs(me.g)) < 1e-6


def test_lambda_is_one_homogeneous():
    st = ExtendedState.from_parts(0.3, [0.5, -1.0], [0.7, 0.2], 1.05)
    oracle = wave_q(2, seed=1)
    assert lambda_fn(st.scaled(2.5), oracle) == pytest.approx(2.5 * lambda_fn(st, oracle), rel=1e-13)
    with pytest.raises(ConfigError):
        lambda_fn((st.x, np.array([-1.0, 0.5, 0.5])), oracle)


def test_flat_case_has_no_connection_or_curvature():
    st = ExtendedState.from_parts(0.0, [0.1, 0.2], [0.8, -0.4], 1.0)
    oracle = constant_q(2, -0.5)
    assert np.max(np.abs(christoffel(st, oracle))) < 1e-10
    assert np.max(np.abs(nonlinear_connection(st, oracle))) < 1e-10
    cv = curvatures(st, oracle)
    assert np.max(np.abs(cv.R)) < 1e-10 and np.max(np.abs(cv.lR)) < 1e-10


@pytest.mark.parametrize("seed", range(3))
def test_two_nonlinear_connection_formulas_agree(seed):
    rng = np.random.default_rng(10 + seed)
    st = random_state(rng)
    con = connections(st, wave_q(2, seed=seed))
    assert np.max(np.abs(con.N - con.N_spray)) < 1e-8 * max(1.0, np.max(np.abs(con.N)))


def test_nonlinear_curvature_is_antisymmetric():
    st = ExtendedState.from_parts(0.2, [0.4, -0.3], [0.9, 0.5], 1.0)
    R = curvatures(st, wave_q(2, seed=4)).R
    assert np.allclose(R, -np.transpose(R, (0, 2, 1)), atol=1e-12)


def test_gamma_and_n_form_geodesics_agree():
    st = ExtendedState.from_parts(0.0, [0.2, -0.1], [0.9, 0.3], 1.0)
    oracle = wave_q(2, seed=7)
    a = run_geodesic(st, oracle, dtau=0.02, n=100, form="gamma_form")
    b = run_geodesic(st, oracle, dtau=0.02, n=100, form="n_form")
    assert np.max(np.abs(a.as_arrays()[1] - b.as_arrays()[1])) < 1e-6


def test_folded_potential_reproduces_newtonian_motion():
    pot = potentials.SoftCoulomb(center=(0.0, 0.0), Z=1.0, a=1.0)
    st = ExtendedState.from_parts(0.0, [-3.0, 1.0], [1.0, 0.0], 1.0)
    geo = run_geodesic(st, constant_q(2, 0.0), pot, dtau=0.01, n=300, potential_mode="folded")
    t = np.asarray(geo.times)

    def rhs(_, z):
        return np.concatenate([z[2:], -pot.gradient(z[None, :2])[0]])

    ref = solve_ivp(rhs, (0, t[-1]), [-3.0, 1.0, 1.0, 0.0], t_eval=t, rtol=1e-12, atol=1e-12)
    assert np.max(np.abs(geo.as_arrays()[1][:, 0] - ref.y[:2].T)) < 1e-8


def test_force_mode_is_not_newtonian():
    """Raising a force with the inverse Finsler metric rescales it: in flat one-dimensional
    space g^11 = 6 / qdot^2 at y0 = 1, so the force mode departs from Newton's law."""
    st = ExtendedState.from_parts(0.0, [0.0], [0.5], 1.0)
    me = metric(st, constant_q(1, 0.0))
    assert me.g_inv[1, 1] == pytest.approx(6.0 / 0.5**2, rel=1e-12)


def test_free_gaussian_geodesic_matches_bohmian_closed_form():
    sigma, k = 3.0, 0.8
    oracle = free_gaussian_q(1, sigma, k0=k)
    q0 = 1.5
    st = ExtendedState.from_parts(0.0, [q0], [k], 1.0)     # v(q0, 0) = k for a minimum-uncertainty packet
    geo = run_geodesic(st, GaugeShift(oracle, 1.0), dtau=0.01, n=400)
    t, q, _ = geo.as_arrays()
    expect = k * t + q0 * np.sqrt(1 + (t / (2 * sigma**2)) ** 2)
    assert np.max(np.abs(q[:, 0, 0] - expect)) < 1e-8


def test_gauge_shift_leaves_extremals_unchanged():
    st = ExtendedState.from_parts(0.0, [0.1, 0.3], [1.2, -0.4], 1.0)
    oracle = wave_q(2, seed=2)
    a = run_geodesic(st, oracle, dtau=0.01, n=200)
    b = run_geodesic(st, GaugeShift(oracle, -0.5), dtau=0.01, n=200)
    ta = np.asarray(a.times)
    qb = path_at_times(b, ta[ta <= b.times[-1]])
    assert np.max(np.abs(qb - a.as_arrays()[1][: len(qb), 0])) < 1e-6


def test_speed_guard_terminates_geodesic():
    st = ExtendedState.from_parts(0.0, [0.0, 0.0], [0.0, 0.0], 1.0)
    geo = run_geodesic(st, constant_q(2, -1.0), dtau=0.1, n=5)
    assert geo.terminated.all() and "v_min" in geo.provenance["terminated"]


def test_degenerate_metric_is_detected():
    # Lambda = 0 where T/y0^2 = Q'
    st = ExtendedState.from_parts(0.0, [0.0], [1.0], 1.0)
    with pytest.raises(DegenerateMetricError):
        metric(st, constant_q(1, 0.5))


def test_admissibility_examples():
    st = ExtendedState.from_parts(0.0, [0.0], [1.0], 1.0)
    rep = check_admissibility(st, constant_q(1, -10.0))
    assert rep.energy_condition and rep.bordered_negative and rep.positive
    assert rep.homogeneity_residual < 1e-12
    assert not check_admissibility(st, constant_q(1, 1.0)).energy_condition


def test_bordered_determinant_closed_form(rng):
    for _ in range(20):
        u, w, m, P = rng.uniform(0.5, 2), rng.uniform(-2, 2), rng.uniform(0.5, 2), rng.uniform(-3, 3)
        T = 0.5 * m * w * w
        assert np.linalg.det(bordered_hessian(u, w, m, P)) == pytest.approx(
            -(m / u) * (T / u**2 - P) ** 2, rel=1e-9, abs=1e-12)
    # the printed matrix differs from the true Hessian only in the (0, 0) entry
    B, Pm = bordered_hessian(1.0, 1.0, 1.0, -1.0), printed_bordered_matrix(1.0, 1.0, 1.0, -1.0)
    assert np.count_nonzero(B != Pm) == 1 and B[0, 0] == 2 * Pm[0, 0]


def test_generalized_q_adds_potential():
    pot = potentials.SoftCoulomb(center=(0.0, 0.0))
    g = GeneralizedQ(constant_q(2, 0.25), pot)
    j = g(0.0, np.array([1.0, 0.5]))
    assert j.Q == pytest.approx(0.25 + pot([[1.0, 0.5]])[0])
    assert np.allclose(j.grad, pot.gradient([[1.0, 0.5]])[0])
