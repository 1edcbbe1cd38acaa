import numpy as np
import pytest

from qtraj import fields, units
from qtraj.errors import ConfigError
from qtraj.lab import (DetectorRecord, accumulate_detector, fringe_analysis, list_presets, load_config,
                       make_record, predicted_band, record_crossings, run_scenario)
from qtraj.lab.cli import main, read_detector_tables
from qtraj.lab.scenario import build_potential, mirror_asymmetry

TINY = """
[grid]
dims = 64 64
box = 48 48
boundary = absorbing
[potential]
kind = slab_slits
inner_gap = 2 bohr
outer_span = 8 bohr
V0 = 5
[initial]
center = -8 0
sigma = 3
k0 = 1.0
[run]
dt = 0.1
n_steps = 60
snapshot_every = 30
[trajectories]
count = 400
seed = 7
[geodesic]
enabled = true
offsets = 0 0.5
[detector]
distance = 6
bins = 32
[output]
name = tiny
"""


def test_config_units_and_hash():
    cfg = load_config(TINY)
    assert cfg.k0 == (1.0, 0.0) and cfg.n_steps == 60 and cfg.potential["V0"] == 5.0
    assert cfg.scenario_id == load_config(TINY.replace("n_steps = 60", "n_steps =   60")).scenario_id
    assert cfg.scenario_id != load_config(TINY.replace("seed = 7", "seed = 8")).scenario_id
    assert load_config(TINY, seed=8).scenario_id == load_config(TINY.replace("seed = 7", "seed = 8")).scenario_id
    assert load_config(TINY, out="/tmp/x").scenario_id == cfg.scenario_id


def test_config_physical_units():
    cfg = load_config("double_slit_b0")
    assert cfg.k_abs == pytest.approx(units.wavenumber_to_au(2.83, "angstrom"))
    assert units.length_from_au(cfg.wavelength, "angstrom") == pytest.approx(2.22, abs=2e-3)
    assert cfg.detector_distance == pytest.approx(units.length_to_au(5.82, "angstrom"))
    v = load_config(TINY.replace("k0 = 1.0", "velocity_mps = 2.18769e6"))
    assert v.k_abs == pytest.approx(1.0, rel=1e-5)


def test_geometry_relative_impact_parameters():
    gap, span = units.length_to_au(2.96, "angstrom"), units.length_to_au(7.94, "angstrom")
    assert load_config("double_slit_be").b == pytest.approx(gap / 2)
    assert load_config("double_slit_bc").b == pytest.approx((gap + span) / 4)
    assert load_config("double_slit_bc").center[1] == pytest.approx((gap + span) / 4)


@pytest.mark.parametrize("bad, match", [
    ("[bogus]\nx = 1\n", "unknown config sections"),
    (TINY.replace("k0 = 1.0", "k0 = fast"), "cannot parse"),
    (TINY.replace("kind = slab_slits", "kind = wormhole"), "unknown potential"),
    (TINY.replace("k0 = 1.0", "k0 = 1.0\nvelocity_mps = 1e6"), "either"),
    (TINY.replace("n_steps = 60", "n_steps = 0"), "at least one step"),
])
def test_config_errors(bad, match):
    with pytest.raises(ConfigError, match=match):
        load_config(bad)


def test_presets_cover_the_experiments():
    names = list_presets()
    assert len(names) >= 5
    for n in ("free_gaussian", "hydrogen_b0", "hydrogen_b9", "double_slit_b0", "double_slit_be", "double_slit_bc"):
        assert n in names
        load_config(n)


def test_record_crossings_bins_first_crossing_only():
    rec = DetectorRecord(plane=0.0, distance=5.0, edges=np.linspace(-2, 2, 5))
    record_crossings(rec, np.array([[-1.0, 0.5], [-1.0, -1.5], [1.0, 0.0]]), np.array([[1.0, 0.5], [-0.5, -1.5], [2.0, 0.0]]))
    record_crossings(rec, np.array([[1.0, 0.5], [-0.5, -1.5], [2.0, 0.0]]), np.array([[-1.0, 0.5], [0.5, -1.5], [3.0, 0.0]]))
    assert rec.counts.tolist() == [1, 0, 1, 0]
    assert rec.n_crossed == 2


def test_plane_wave_flux_is_uniform_without_aliasing():
    g = fields.grid((64, 64), (48.0, 48.0), origin=(-24.0, -24.0))
    x, _ = g.mesh()
    k = 2 * np.pi * 4 / 48.0
    f = fields.WaveField(g, np.exp(1j * k * x))
    rec = make_record(g, 0.0, 5.0, 30, span=(-20.0, 20.0))   # bins 4/3 wide, grid spacing 3/4
    accumulate_detector(rec, [f, f.replace(f.values, 1.0)])
    assert np.allclose(rec.flux, k * 1.0 * rec.bin_width, rtol=1e-10)


def test_fringe_analysis_on_synthetic_two_slit_profile():
    lam, d, L = 4.2, 10.3, 200.0
    rec = DetectorRecord(plane=0.0, distance=L, edges=np.linspace(-150, 150, 601))
    y = rec.centers
    theta = np.arctan2(y, L)
    rec.flux = np.cos(np.pi * d * np.sin(theta) / lam) ** 2 * np.exp(-(theta / 2.0) ** 2)
    rep = fringe_analysis(rec, lam, (d - 4, d + 4))
    expect = np.degrees(np.arcsin(lam / d))
    assert abs(rep.first_order[1] - expect) < 0.5 and abs(rep.first_order[0] + expect) < 0.5
    assert rep.peak_angles[rep.central_index] == pytest.approx(0.0, abs=0.2)
    assert predicted_band(lam, (d - 4, d + 4))[0] < expect < predicted_band(lam, (d - 4, d + 4))[1]


def test_empty_detector_reports_no_peaks():
    rec = DetectorRecord(plane=0.0, distance=5.0, edges=np.linspace(-2, 2, 5))
    rep = fringe_analysis(rec, 4.2)
    assert "empty" in rep.diagnostic and not rep.first_in_band


def test_mirror_asymmetry_of_symmetric_density():
    cfg = load_config(TINY)
    g = fields.grid(cfg.dims, cfg.box, cfg.origin)
    _, yy = g.mesh()
    rho = np.exp(-yy**2 / 8.0)
    assert mirror_asymmetry(rho, g, 1) < 1e-12
    assert mirror_asymmetry(np.exp(-(yy - 1) ** 2 / 8.0), g, 1) > 0.1
    assert build_potential(cfg).symmetry_axis == pytest.approx(0.0)


@pytest.fixture(scope="module")
def tiny_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("runs")
    cfg = load_config(TINY, out=str(out))
    return run_scenario(cfg)


def test_tiny_scenario_writes_run_directory(tiny_run):
    d = tiny_run.run_dir
    for name in ("config.cfg", "report.txt", "detector.tsv", "trajectories/bohmian.tsv"):
        assert (d / name).is_file()
    assert not (d / "INCOMPLETE").exists()
    text = (d / "report.txt").read_bytes()
    assert b"\r\n" not in text and text.decode("utf-8").startswith("scenario tiny")
    recs = read_detector_tables(d / "detector.tsv")
    assert recs and np.array_equal(recs[0].counts, tiny_run.detectors[0].counts)
    assert tiny_run.equivalence is not None and tiny_run.equivalence.deviation.shape[1] == 2


def test_cli_exit_codes(tmp_path, capsys, tiny_run):
    assert main(["presets"]) == 0
    assert "free_gaussian" in capsys.readouterr().out
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2
    assert main(["frobnicate"]) == 2
    bad = tmp_path / "bad.cfg"
    bad.write_text(TINY.replace("sigma = 3", "sigma = 0.5"))
    assert main(["run", str(bad), "--out", str(tmp_path)]) == 2
    assert main(["analyze", str(tiny_run.run_dir)]) == 0
    assert "dual-mode L1" in capsys.readouterr().out
    assert main(["analyze", str(tmp_path)]) == 2


def test_cli_physics_failure_exit_code(tmp_path, monkeypatch):
    from qtraj.errors import NonFiniteFieldError
    from qtraj.lab import cli

    def blow_up(cfg):
        raise NonFiniteFieldError("[one-body] non-finite amplitude after step from t=1")

    monkeypatch.setattr(cli, "run_scenario", blow_up)
    cfg = tmp_path / "ok.cfg"
    cfg.write_text(TINY)
    assert main(["run", str(cfg), "--out", str(tmp_path)]) == 1


def test_cli_convert(tmp_path, tiny_run):
    snaps = sorted((tiny_run.run_dir / "snapshots").glob("*.qsnap"))
    if not snaps:
        pytest.skip("no snapshots written")
    out = tmp_path / "snap.txt"
    assert main(["convert", str(snaps[0]), "-o", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0].startswith("# time=") and len(lines) == 2 + 64 * 64


def test_check_finsler_cli(capsys):
    assert main(["check-finsler", TINY, "--samples", "20"]) == 0
    assert "(iii) bordered determinant" in capsys.readouterr().out
