import numpy as np
import pytest

from qtraj import fields, pilot, twobody
from qtraj.errors import ConfigError, GridBudgetError


@pytest.fixture
def orbitals():
    g = fields.grid((24, 24), (24.0, 24.0), origin=(-12.0, -12.0))
    a = fields.init_gaussian(g, (-4.0, 1.0), (0.6, 0.0), 3.5)
    b = fields.init_gaussian(g, (2.0, -1.0), (0.0, 0.2), 3.5)
    return g, a, b


def test_exchange_symmetry(orbitals):
    g, a, b = orbitals
    tb = twobody.symmetrize(a, b)
    assert np.max(np.abs(tb.values - tb.swapped_values())) <= 1e-12


def test_literal_prefactor_norm_and_renormalization(orbitals):
    g, a, b = orbitals
    tb = twobody.symmetrize(a, b)
    S = twobody.overlap(a, b)
    # independent oracle: materialize the literal field and sum on the product grid
    lit = tb.literal_prefactor * (np.multiply.outer(a.values, b.values) + np.multiply.outer(b.values, a.values))
    lit_norm = np.sqrt(np.sum(np.abs(lit) ** 2) * g.dV**2)
    assert tb.literal_norm == pytest.approx(lit_norm, rel=1e-12)
    assert tb.literal_norm == pytest.approx(np.sqrt(0.5), rel=1e-10)
    assert tb.literal_prefactor == pytest.approx(1 / (2 * np.sqrt(1 + abs(S) ** 2)))
    assert tb.norm_on_grid() == pytest.approx(1.0, abs=1e-10)


def test_identical_orbitals_give_product_state(orbitals):
    g, a, _ = orbitals
    tb = twobody.symmetrize(a, a)
    assert abs(tb.S) == pytest.approx(1.0, abs=1e-12)
    assert np.allclose(tb.values, np.multiply.outer(a.values, a.values), atol=1e-12)
    assert tb.norm() == pytest.approx(1.0, abs=1e-10)


def test_conditional_velocity_reduces_to_one_body_when_factorized(orbitals):
    g, a, b = orbitals
    tb = twobody.symmetrize(a, a)
    frozen = np.array([g.axes[0][10], g.axes[1][13]])
    v = pilot.conditional_velocity(tb, 1, frozen)
    v1 = pilot.derive_pilot(a, with_Q=False).v
    core = (slice(None), slice(4, 20), slice(4, 20))
    assert np.max(np.abs(v[core] - v1[core])) <= 1e-8


def test_pilot_at_matches_grid_velocity(orbitals):
    g, a, b = orbitals
    tb = twobody.symmetrize(a, b)
    i1, j1, i2, j2 = 10, 12, 13, 11
    q1 = np.array([[g.axes[0][i1], g.axes[1][j1]]])
    q2 = np.array([[g.axes[0][i2], g.axes[1][j2]]])
    v, Q, gQ = twobody.pilot_at(tb, q1, q2)
    psi = tb.values
    grads = [fields.derivative(psi, fields.grid((24,) * 4, (24.0,) * 4, origin=(-12.0,) * 4), d)
             for d in range(4)]
    idx = (i1, j1, i2, j2)
    expect = np.array([(gr[idx] / psi[idx]).imag for gr in grads])
    assert np.allclose(v[:, 0], expect, atol=1e-10)
    assert np.all(np.isfinite(Q)) and gQ.shape == (4, 1)


def test_budget_and_dimension_limits():
    g3 = fields.grid((8, 8, 8), (8.0, 8.0, 8.0))
    f = fields.WaveField(g3, np.ones(g3.shape))
    with pytest.raises(ConfigError):
        twobody.symmetrize(f, f)
    g = fields.grid((64, 64), (64.0, 64.0))
    f = fields.WaveField(g, np.ones(g.shape))
    with pytest.raises(GridBudgetError):
        twobody.symmetrize(f, f, budget=10**6)


def test_evolve_pair_and_provenance(orbitals):
    from qtraj.propagator import PropagatorConfig

    g, a, b = orbitals
    seq = twobody.evolve_pair(a, b, None, PropagatorConfig(dt=0.1), 4, every=2)
    assert [round(s.time, 10) for s in seq] == [0.0, 0.2, 0.4]
    prov = twobody.provenance(seq[-1])
    assert prov["spin"] == "singlet" and "independent-particle" in prov["approximation"]
