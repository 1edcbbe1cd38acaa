import numpy as np
import pytest

from qtraj import fields, potentials
from qtraj.errors import ConfigError


def _fd_grad(pot, p, h=1e-5):
    g = np.zeros_like(p)
    for d in range(p.shape[1]):
        e = np.zeros(p.shape[1])
        e[d] = h
        g[:, d] = (pot(p + e) - pot(p - e)) / (2 * h)
    return g


@pytest.mark.parametrize("pot", [
    potentials.SoftCoulomb(center=(0.5, -1.0), Z=1.0, a=0.5),
    potentials.SlabSlits(plane=0.0, thickness=2.0, V0=11.2, slits=((-7.5, -2.8), (2.8, 7.5)), smoothing=0.5),
])
def test_analytic_gradient_matches_finite_difference(pot, rng):
    p = rng.uniform(-9, 9, (50, 2))
    assert np.allclose(pot.gradient(p), _fd_grad(pot, p), atol=1e-6)


def test_soft_coulomb_depth():
    pot = potentials.SoftCoulomb(center=(0.0, 0.0), Z=2.0, a=0.5)
    assert pot(np.zeros((1, 2)))[0] == pytest.approx(-4.0)
    with pytest.raises(ConfigError):
        pot.check_dims(3)


def test_slab_profile_levels():
    s = potentials.double_slit_geometry(2.0, 8.0)
    assert s == ((-4.0, -1.0), (1.0, 4.0))
    assert potentials.double_slit_from_width(3.0, 2.0) == s
    pot = potentials.SlabSlits(plane=0.0, thickness=4.0, V0=5.0, slits=s, smoothing=0.1)
    assert pot(np.array([[0.0, 0.0]]))[0] == pytest.approx(5.0, rel=1e-6)    # wall between slits
    assert pot(np.array([[0.0, 2.5]]))[0] == pytest.approx(0.0, abs=1e-6)    # open slit
    assert pot(np.array([[6.0, 0.0]]))[0] == pytest.approx(0.0, abs=1e-6)    # beyond the slab
    assert pot.symmetry_axis == pytest.approx(0.0)


def test_slab_validation():
    with pytest.raises(ConfigError):
        potentials.SlabSlits(0.0, 2.0, 1.0, ((0.0, 2.0), (1.0, 3.0)))
    with pytest.raises(ConfigError):
        potentials.SlabSlits(0.0, 2.0, -1.0, ((0.0, 2.0),))
    with pytest.raises(ConfigError):
        potentials.double_slit_geometry(5.0, 3.0)


def test_sum_and_grid_evaluation():
    g = fields.grid((32, 32), (16.0, 16.0), origin=(-8.0, -8.0))
    a = potentials.SoftCoulomb(center=(0.0, 0.0))
    b = potentials.SoftCoulomb(center=(2.0, 0.0), Z=0.5)
    s = potentials.SumPotential((a, b))
    pts = np.stack([m.ravel() for m in g.mesh()], 1)
    assert np.allclose(s.on_grid(g).ravel(), a(pts) + b(pts))
    assert np.allclose(potentials.gradient(s, [1.0, 1.0]), a.gradient([[1.0, 1.0]])[0] + b.gradient([[1.0, 1.0]])[0])
    assert np.all(potentials.evaluate(potentials.Free(), g) == 0)
