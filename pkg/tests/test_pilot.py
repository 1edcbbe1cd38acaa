import numpy as np
import pytest

from qtraj import fields, pilot, propagator
from qtraj.errors import ConfigError, NodeError
from qtraj.finsler import free_gaussian_q


@pytest.fixture
def g():
    return fields.grid((128, 128), (96.0, 96.0), origin=(-48.0, -48.0))


def test_plane_wave_velocity_and_zero_quantum_potential(g):
    k = 2 * np.pi * 4 / 96.0
    x, _ = g.mesh()
    pil = pilot.derive_pilot(fields.WaveField(g, np.exp(1j * k * x)))
    assert np.allclose(pil.v[0], k, atol=1e-10) and np.allclose(pil.v[1], 0, atol=1e-10)
    assert np.max(np.abs(pil.Q)) < 1e-9 and np.max(np.abs(pil.gradQ)) < 1e-9


def test_gaussian_quantum_potential_matches_closed_form(g):
    sigma = 5.0
    f = fields.init_gaussian(g, (0.0, 0.0), (0.3, 0.0), sigma)
    pil = pilot.derive_pilot(f)
    oracle = free_gaussian_q(2, sigma)
    pts = np.array([[1.0, 2.0], [-3.0, 4.0], [6.0, -5.0]])
    for p in pts:
        i, j = np.round((p - g.origin) / g.h).astype(int)
        jet = oracle(0.0, np.array([g.axes[0][i], g.axes[1][j]]))
        assert pil.Q[i, j] == pytest.approx(jet.Q, abs=1e-10)
        assert np.allclose(pil.gradQ[:, i, j], jet.grad, atol=1e-10)
        assert np.allclose(pil.v[:, i, j], (0.3, 0.0), atol=1e-10)


def test_pointwise_pilot_matches_grid_pilot(g):
    f = fields.init_gaussian(g, (2.0, -1.0), (0.5, 0.2), 5.0)
    jet = pilot.spectral_jet(f.values, g)
    v, Q, gQ = pilot.pointwise_pilot(f.values, jet["grad"], jet["lap"], jet["hess"], jet["grad_lap"])
    pil = pilot.derive_pilot(f)
    core = (slice(40, 90), slice(40, 90))
    assert np.allclose(v[(slice(None),) + core], pil.v[(slice(None),) + core])
    assert np.allclose(Q[core], pil.Q[core])
    assert np.allclose(gQ[(slice(None),) + core], pil.gradQ[(slice(None),) + core])


def test_nodes_are_masked_and_filled(g):
    x, _ = g.mesh()
    psi = np.sin(2 * np.pi * 2 * x / 96.0) + 0j
    pil = pilot.derive_pilot(fields.WaveField(g, psi), v_max=3.0)
    assert pil.node_mask.any()
    assert np.all(np.isfinite(pil.v)) and np.all(np.isfinite(pil.Q))
    with pytest.raises(NodeError):
        pilot.derive_pilot(fields.WaveField(g, np.zeros(g.shape)))


def test_bohmian_trajectories_follow_closed_form_scaling(g):
    sigma, k = 4.0, 0.5
    f = fields.init_gaussian(g, (-10.0, 0.0), (k, 0.0), sigma)
    q0 = np.array([[-10.0, 0.0], [-6.0, 2.0], [-13.0, -4.0]])
    b = pilot.TrajectoryBundle(q0)
    prop = propagator.Propagator(g, None, propagator.PropagatorConfig(dt=0.1))
    now = pilot.derive_pilot(f, with_Q=False)
    for _ in range(100):
        f = prop.step(f)
        nxt = pilot.derive_pilot(f, with_Q=False)
        pilot.step_bohmian(b, now, nxt)
        now = nxt
    t = b.times[-1]
    scale = np.sqrt(1 + (t / (2 * sigma**2)) ** 2)
    centre = np.array([-10.0 + k * t, 0.0])
    expect = centre + (q0 - [-10.0, 0.0]) * scale
    assert np.max(np.abs(b.current - expect)) < 1e-3
    assert not b.terminated.any()


def test_trajectories_leaving_the_interior_are_terminated():
    g = fields.grid((64, 64), (64.0, 64.0), origin=(-32.0, -32.0), boundary="absorbing")
    f = fields.init_gaussian(g, (0.0, 0.0), (1.0, 0.0), 4.0)
    b = pilot.TrajectoryBundle([[24.0, 0.0], [0.0, 0.0]])
    p = pilot.derive_pilot(f, with_Q=False)
    f1 = f.replace(f.values, 1.0)
    for _ in range(3):
        pilot.step_bohmian(b, p, pilot.derive_pilot(f1, with_Q=False), 1.0)
        f1 = f1.replace(f1.values, f1.time + 1.0)
        p = pilot.derive_pilot(f1.replace(f1.values, f1.time - 1.0), with_Q=False)
    assert b.terminated.tolist() == [True, False]


def test_density_sampling_is_seeded(g):
    f = fields.init_gaussian(g, (0, 0), (0, 0), 5.0)
    a = pilot.sample_initial_positions(f, 500, seed=3)
    assert np.array_equal(a, pilot.sample_initial_positions(f, 500, seed=3))
    assert not np.array_equal(a, pilot.sample_initial_positions(f, 500, seed=4))
    line = pilot.sample_initial_positions(f, 5, "regular_grid_line", axis=1, length=8.0)
    assert np.allclose(line[:, 1], [-4, -2, 0, 2, 4]) and np.allclose(line[:, 0], 0.0, atol=1e-10)
    with pytest.raises(ConfigError):
        pilot.sample_initial_positions(f, 5, "poisson")


def test_marginal_l1_detects_mismatch(g):
    f = fields.init_gaussian(g, (0, 0), (0, 0), 5.0)
    good = pilot.sample_initial_positions(f, 20000, seed=0)
    assert pilot.marginal_l1(good, f, 0)[0] < 0.06
    assert pilot.marginal_l1(good + [3.0, 0.0], f, 0)[0] > 0.3


def test_trajectory_file_round_trip(tmp_path):
    b = pilot.TrajectoryBundle([[0.1, 0.2], [1.0 / 3.0, -2.0]], provenance={"scenario_id": "x1"})
    b.append(0.5, [[0.2, 0.3], [0.4, -1.9]], [[0.2, 0.2], [0.1, 0.2]], y0=[1.0, 1.1])
    b.terminated[1] = True
    b.write(tmp_path / "t.tsv")
    r = pilot.read_trajectories(tmp_path / "t.tsv")
    t0, q0, v0 = b.as_arrays()
    t1, q1, v1 = r.as_arrays()
    assert np.array_equal(t0, t1) and np.array_equal(q0, q1)
    assert np.array_equal(v0[1:], v1[1:])
    assert r.provenance["scenario_id"] == "x1" and r.terminated.tolist() == [False, True]
    with pytest.raises(ValueError):
        b.append(0.5, b.current, b.current)
