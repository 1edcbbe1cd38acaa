import numpy as np
import pytest

from qtraj import fields, units
from qtraj.errors import ConfigError, GridBudgetError, NonFiniteFieldError


def test_unit_conversions_round_trip():
    assert units.length_to_au(1.0, "angstrom") == pytest.approx(1.0 / 0.529177210903, rel=1e-12)
    assert units.length_from_au(units.length_to_au(2.96, "angstrom"), "angstrom") == pytest.approx(2.96)
    # 2.83 1/angstrom is lambda = 2.22 angstrom
    k = units.wavenumber_to_au(2.83, "angstrom")
    lam = units.length_from_au(units.de_broglie_wavelength(k), "angstrom")
    assert lam == pytest.approx(2.2202, abs=1e-3)


def test_grid_spec_validation():
    with pytest.raises(ConfigError):
        fields.grid((4, 64), (10.0, 10.0))
    with pytest.raises(ConfigError):
        fields.grid((64, 64), (10.0, -1.0))
    with pytest.raises(ConfigError):
        fields.grid((64,), (10.0,), boundary="reflecting")
    with pytest.raises(GridBudgetError):
        fields.grid((128, 128), (10.0, 10.0), budget=1000)


def test_grid_geometry(grid2d):
    assert grid2d.shape == (64, 64)
    assert np.allclose(grid2d.h, 1.0)
    assert grid2d.dV == pytest.approx(1.0)
    assert np.allclose(grid2d.k_max, np.pi)


def test_absorbing_mask_and_interior():
    g = fields.grid((64, 64), (64.0, 64.0), origin=(-32.0, -32.0), boundary="absorbing")
    m = g.absorbing_mask()
    assert m[32, 32] == 1.0 and m[0, 32] == 0.0
    assert g.interior([[0.0, 0.0]])[0]
    assert not g.interior([[-31.0, 0.0]])[0]


def test_gaussian_is_normalized_with_expected_moments(grid2d):
    f = fields.init_gaussian(grid2d, (1.0, -2.0), (0.5, 0.0), 4.0)
    assert f.norm() == pytest.approx(1.0, abs=1e-12)
    x, y = grid2d.mesh()
    rho = f.density() * grid2d.dV
    assert np.sum(rho * x) == pytest.approx(1.0, abs=1e-8)
    assert np.sum(rho * y) == pytest.approx(-2.0, abs=1e-8)
    # sigma is the standard deviation of |psi|^2 per axis
    assert np.sqrt(np.sum(rho * (x - 1.0) ** 2)) == pytest.approx(4.0, rel=1e-6)


def test_gaussian_rejects_aliasing_and_underresolution(grid2d):
    with pytest.raises(ConfigError):
        fields.init_gaussian(grid2d, (0, 0), (2.0, 0), 4.0)
    with pytest.raises(ConfigError):
        fields.init_gaussian(grid2d, (0, 0), (0, 0), 2.0)


def test_wavefield_rejects_non_finite(grid2d):
    v = np.ones(grid2d.shape, complex)
    v[3, 3] = np.nan
    with pytest.raises(NonFiniteFieldError):
        fields.WaveField(grid2d, v)


def test_spectral_derivatives_of_periodic_function(grid2d):
    x, y = grid2d.mesh()
    kx = 2 * np.pi * 3 / 64.0
    f = np.sin(kx * x) * np.cos(kx * y)
    d = fields.derivative(f, grid2d, 0)
    assert np.max(np.abs(d - kx * np.cos(kx * x) * np.cos(kx * y))) < 1e-12
    lap = fields.laplacian(f, grid2d)
    assert np.max(np.abs(lap + 2 * kx**2 * f)) < 1e-12
    d4 = fields.derivative(f, grid2d, 0, method="central-4th")
    assert np.max(np.abs(d4 - d)) < 1e-3


def test_interpolation_is_exact_for_linear_functions(grid2d):
    x, y = grid2d.mesh()
    f = 2.0 * x - 3.0 * y + 1.0
    pts = np.array([[0.3, 0.7], [-5.25, 10.5], [12.0, -1.1]])
    got = fields.interpolate(f, grid2d, pts)
    assert np.allclose(got, 2 * pts[:, 0] - 3 * pts[:, 1] + 1.0, atol=1e-12)


def test_snapshot_round_trip(tmp_path, grid2d):
    f = fields.init_gaussian(grid2d, (0, 0), (0.5, 0.25), 4.0, time=1.25)
    p = fields.write_snapshot(tmp_path / "s.bin", f.values, grid2d, f.time, extra={"scenario_id": "abc"})
    vals, g, t, rank = fields.read_snapshot(p)
    assert np.array_equal(vals, f.values)
    assert t == 1.25 and rank == 1 and g.shape == grid2d.shape
    meta = (tmp_path / "s.bin.meta").read_text()
    assert "scenario_id=abc" in meta and "units=hartree-atomic" in meta


def test_snapshot_rejects_foreign_file(tmp_path):
    p = tmp_path / "junk.bin"
    p.write_bytes(b"not a snapshot at all, definitely not")
    with pytest.raises(ConfigError):
        fields.read_snapshot(p)
