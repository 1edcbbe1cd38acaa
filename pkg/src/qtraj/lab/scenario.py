"""Scenario pipeline: initial state, propagation with observers (snapshot
writer, Bohmian stepper, geodesic stepper, detector accumulators), analysis,
and the run directory."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field as dc_field
from importlib import resources
from pathlib import Path

import numpy as np

from .. import fields, pilot, twobody
from ..errors import ConfigError, NodeError, QTrajError
from ..finsler import ExtendedState, GaugeShift, GeodesicIntegrator, SnapshotOracle
from ..potentials import Free, SlabSlits, SoftCoulomb, double_slit_from_width, double_slit_geometry
from ..propagator import Propagator, PropagatorConfig
from ..units import BOHR_ANGSTROM, length_from_au
from .compare import EquivalenceReport, compare_pictures
from .config import ScenarioConfig, load_config
from .detector import (DetectorRecord, FluxAccumulator, fringe_analysis, make_record, peak_masses,
                       record_crossings)

log = logging.getLogger(__name__)

PRESET_DIR = "presets"


# ---------------------------------------------------------------------- presets

def _preset_root():
    return resources.files("qtraj").joinpath(PRESET_DIR)


def list_presets():
    root = _preset_root()
    return sorted(p.name[:-4] for p in root.iterdir() if p.name.endswith(".cfg"))


def preset_path(name):
    name = Path(name).name
    if name.endswith(".cfg"):
        name = name[:-4]
    p = _preset_root().joinpath(name + ".cfg")
    return Path(str(p)) if p.is_file() else None


def preset_description(name):
    text = preset_path(name).read_text(encoding="utf-8")
    for line in text.splitlines():
        if line.startswith("#"):
            return line.lstrip("# ").strip()
    return ""


# ------------------------------------------------------------------- building

def build_grid(cfg: ScenarioConfig):
    return fields.make_grid(fields.GridSpec(cfg.dims, cfg.box, cfg.origin, cfg.boundary))


def slit_intervals(cfg: ScenarioConfig):
    p = cfg.potential
    kind, a, b = p["geometry"]
    if kind == "edges":
        return double_slit_geometry(a, b, p["axis_position"])
    return double_slit_from_width(a, b, p["axis_position"])


def build_potential(cfg: ScenarioConfig):
    p = cfg.potential
    if p["kind"] == "free":
        return Free()
    if p["kind"] == "soft_coulomb":
        return SoftCoulomb(center=p["center"], Z=p["Z"], a=p["a"])
    return SlabSlits(plane=p["plane"], thickness=p["thickness"], V0=p["V0"], slits=slit_intervals(cfg),
                     smoothing=p["smoothing"], beam_axis=cfg.beam_axis, transverse_axis=cfg.transverse_axis)


def reference_plane(cfg: ScenarioConfig):
    """Beam-axis coordinate that detector distances are measured from."""
    p = cfg.potential
    if p["kind"] == "slab_slits":
        return p["plane"]
    if p["kind"] == "soft_coulomb":
        return p["center"][cfg.beam_axis]
    return cfg.center[cfg.beam_axis]


def target_axis(cfg: ScenarioConfig):
    p = cfg.potential
    if p["kind"] == "slab_slits":
        return p["axis_position"]
    if p["kind"] == "soft_coulomb":
        return p["center"][cfg.transverse_axis]
    return 0.0


# -------------------------------------------------------------------- outputs

@dataclass
class RunArtifacts:
    config: ScenarioConfig
    grid: object
    field: object = None
    orbitals: tuple = None
    bohmian: pilot.TrajectoryBundle = None
    matched: pilot.TrajectoryBundle = None
    geodesics: list = dc_field(default_factory=list)
    detectors: list = dc_field(default_factory=list)
    fringes: list = dc_field(default_factory=list)
    equivalence: EquivalenceReport = None
    metrics: dict = dc_field(default_factory=dict)
    report: str = ""
    run_dir: Path = None
    snapshots: list = dc_field(default_factory=list)


class SnapshotWriter:
    def __init__(self, directory: Path, every, scenario_id, rank=1, tag=None):
        self.dir, self.every, self.sid, self.rank, self.tag = directory, every, scenario_id, rank, tag
        self.paths = []

    def __call__(self, field, step):
        if self.every and step % self.every == 0:
            name = f"step_{step:06d}" + (f"_{self.tag}" if self.tag else "") + ".qsnap"
            extra = {"scenario_id": self.sid}
            if self.tag:
                extra["orbital"] = self.tag
            self.paths.append(fields.write_snapshot(self.dir / name, field.values, field.grid, field.time,
                                                    self.rank, extra))


class TwoBodyStepper:
    """RK4 for configuration-space points (q1, q2) under the two-electron
    velocity field, linearly interpolated in time between two symmetrized
    snapshots.  The orbitals' values and gradients are precomputed once per
    snapshot."""

    def __init__(self, grid, v_max):
        self.grid, self.v_max = grid, v_max

    def prepare(self, tb: twobody.TwoBodyField):
        g = self.grid
        stack = []
        for phi in (tb.phi_a.values, tb.phi_b.values):
            stack.append(phi[None])
            stack.append(fields.gradient(phi, g))
        amax = 2.0 * tb.prefactor * np.abs(tb.phi_a.values).max() * np.abs(tb.phi_b.values).max()
        return np.concatenate(stack), tb.prefactor, amax

    def velocity(self, prep, q):
        stack, c, amax = prep
        g = self.grid
        n = g.ndim
        v1 = fields.interpolate(stack, g, q[:, :n])
        v2 = fields.interpolate(stack, g, q[:, n:])
        a1, ga1, b1, gb1 = v1[0], v1[1:1 + n], v1[1 + n], v1[2 + n:]
        a2, ga2, b2, gb2 = v2[0], v2[1:1 + n], v2[1 + n], v2[2 + n:]
        psi = c * (a1 * b2 + a2 * b1)
        grad = c * np.concatenate([ga1 * b2 + gb1 * a2, a1 * gb2 + b1 * ga2])
        node = np.abs(psi) < pilot.NODE_EPS * amax
        safe = np.where(node, 1.0, psi)
        v = np.imag(grad / safe).T
        v[node] = 0.0
        sp = np.linalg.norm(v, axis=1)
        over = sp > self.v_max
        v[over] *= (self.v_max / sp[over])[:, None]
        return v, node

    def step(self, bundle, prep_now, prep_next, t_now, dt):
        g = self.grid
        n = g.ndim
        q0 = bundle.current.copy()
        act = ~bundle.terminated
        flagged = np.zeros(len(q0), bool)

        def inside(q):
            return g.interior(q[:, :n]) & g.interior(q[:, n:])

        def f(q, th):
            out = np.zeros_like(q)
            ok = act & inside(q)
            if ok.any():
                va, na = self.velocity(prep_now, q[ok])
                vb, nb = self.velocity(prep_next, q[ok])
                out[ok] = (1 - th) * va + th * vb
                flagged[np.flatnonzero(ok)[na | nb]] = True
            bad[~ok & act] = True
            return out

        bad = np.zeros(len(q0), bool)
        k1 = f(q0, 0.0)
        k2 = f(q0 + 0.5 * dt * k1, 0.5)
        k3 = f(q0 + 0.5 * dt * k2, 0.5)
        k4 = f(q0 + dt * k3, 1.0)
        q1 = q0 + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        out = act & (bad | ~inside(q1))
        q1[out | bundle.terminated] = q0[out | bundle.terminated]
        bundle.terminated |= out
        bundle.flagged |= flagged
        v1, _ = self.velocity(prep_next, q1)
        v1[bundle.terminated] = 0.0
        bundle.append(t_now + dt, q1, v1)


def mirror_asymmetry(density, grid, axis, axis_position=0.0):
    """Relative L1 distance between ``density`` and its reflection through
    ``axis_position`` along ``axis``."""
    x = grid.axes[axis]
    xr = 2.0 * axis_position - x
    d = np.moveaxis(density, axis, -1)
    if np.allclose(xr[1:][::-1], x[1:], atol=1e-9 * grid.h[axis]):
        # reflection maps nodes onto nodes: index i -> N - i
        m = np.roll(np.flip(d, -1), 1, -1)
    else:
        flat = d.reshape(-1, d.shape[-1])
        m = np.array([np.interp(xr, x, row, left=0.0, right=0.0) for row in flat]).reshape(d.shape)
    return float(np.abs(d - m).sum() / np.abs(d).sum())


def count_lobes(density, grid, cfg: ScenarioConfig, x_from, prominence=0.05):
    """Number of peaks in the transverse profile of ``density`` integrated over
    beam coordinates beyond ``x_from``."""
    from scipy.signal import find_peaks

    ax, tr = cfg.beam_axis, cfg.transverse_axis
    x = grid.axes[ax]
    sel = [slice(None)] * grid.ndim
    sel[ax] = x > x_from
    prof = density[tuple(sel)].sum(axis=ax)
    if tr > ax:
        tr -= 1
    other = tuple(a for a in range(prof.ndim) if a != tr)
    if other:
        prof = prof.sum(axis=other)
    if not prof.max() > 0:
        return 0
    idx, _ = find_peaks(prof / prof.max(), prominence=prominence)
    return int(len(idx))


# ------------------------------------------------------------------- pipeline

def run_scenario(cfg, write=True, out_dir=None, n_steps=None, keep_fields=False) -> RunArtifacts:
    """Run one scenario end to end; see the module docstring."""
    if not isinstance(cfg, ScenarioConfig):
        cfg = load_config(cfg)
    if n_steps is not None:
        cfg = cfg.with_overrides(n_steps=int(n_steps))
    fields.set_threads(cfg.threads)
    art = RunArtifacts(cfg, None)
    run_dir = None
    if write:
        base = Path(out_dir if out_dir is not None else cfg.output_dir)
        run_dir = base / f"{cfg.name}-{cfg.scenario_id}"
        (run_dir / "snapshots").mkdir(parents=True, exist_ok=True)
        (run_dir / "trajectories").mkdir(exist_ok=True)
        (run_dir / "config.cfg").write_text(cfg.text, encoding="utf-8", newline="\n")
        (run_dir / "INCOMPLETE").write_text("run in progress\n", encoding="utf-8", newline="\n")
        art.run_dir = run_dir
    stage = "setup"
    try:
        art.grid = build_grid(cfg)
        potential = build_potential(cfg)
        if cfg.kind == "hydrogen" and cfg.potential.get("with_electron", True):
            stage = "two-body"
            _run_two_body(cfg, art, potential, run_dir)
        else:
            stage = "one-body"
            _run_one_body(cfg, art, potential, run_dir, keep_fields)
        stage = "report"
        art.report = build_report(art)
        if write:
            _write_outputs(art)
            (run_dir / "INCOMPLETE").unlink()
    except (QTrajError, ConfigError) as exc:
        if write and run_dir is not None:
            (run_dir / "report.txt").write_text(
                f"scenario {cfg.name} id {cfg.scenario_id}\nstatus: INCOMPLETE\nfailed stage: {stage}\n"
                f"error: {type(exc).__name__}: {exc}\n", encoding="utf-8", newline="\n")
        exc.args = (f"[{stage}] {exc.args[0] if exc.args else ''}",) + tuple(exc.args[1:])
        raise
    return art


def _provenance(cfg: ScenarioConfig, grid):
    return {
        "scenario_id": cfg.scenario_id,
        "scenario": cfg.name,
        "seed": cfg.seed,
        "threads": cfg.threads,
        "grid": f"dims={','.join(map(str, grid.shape))} box={','.join(repr(float(b)) for b in grid.box)} "
                f"origin={','.join(repr(float(o)) for o in grid.origin)} boundary={grid.spec.boundary}",
        "node_handling": "eps=1e-6*max(A), nearest-unmasked fill, speed clamp",
        "interpolation": "multilinear in space, linear in time, RK4",
        "units": "hartree-atomic",
    }


def _detectors(cfg: ScenarioConfig, grid):
    recs = []
    ref = reference_plane(cfg)
    axis = target_axis(cfg)
    for d in (cfg.detector_distance, cfg.alternate_distance):
        if np.isfinite(d):
            recs.append(make_record(grid, ref + d, d, cfg.detector_bins, axis, cfg.beam_axis, cfg.transverse_axis))
    return recs


def _initial_positions(cfg: ScenarioConfig, field0, grid):
    if cfg.traj_count == 0:
        return np.zeros((0, grid.ndim))
    length = None if not np.isfinite(cfg.line_length) else cfg.line_length
    return pilot.sample_initial_positions(field0, cfg.traj_count, cfg.traj_mode, cfg.seed, axis=cfg.transverse_axis,
                                          length=length, center=np.asarray(cfg.center))


def _run_one_body(cfg: ScenarioConfig, art: RunArtifacts, potential, run_dir, keep_fields=False):
    grid = art.grid
    field0 = fields.init_gaussian(grid, cfg.center, cfg.k0, cfg.sigma)
    prop = Propagator(grid, potential, PropagatorConfig(cfg.scheme, cfg.dt))
    v_max = cfg.v_max_factor * cfg.k_abs if cfg.k_abs > 0 else None
    need_q = cfg.geodesic_enabled
    prov = _provenance(cfg, grid)

    pil = pilot.derive_pilot(field0, with_Q=need_q, v_max=v_max)
    q0 = _initial_positions(cfg, field0, grid)
    bundle = pilot.TrajectoryBundle(q0, 0.0, "bohmian", provenance=prov,
                                    velocities=pil.velocity_at(q0) if len(q0) else None)
    detectors = _detectors(cfg, grid)
    flux = [FluxAccumulator(r, grid, cfg.dt) for r in detectors]
    for f in flux:
        f.start(field0)

    oracle = integrators = matched = None
    if cfg.geodesic_enabled:
        launch = np.repeat(np.asarray(cfg.center, float)[None], len(cfg.geodesic_offsets), axis=0)
        launch[:, cfg.transverse_axis] += np.asarray(cfg.geodesic_offsets)
        v0 = pil.velocity_at(launch)
        matched = pilot.TrajectoryBundle(launch, 0.0, "bohmian", provenance=dict(prov, role="matched"),
                                         velocities=v0)
        gpot = None if isinstance(potential, Free) else potential
        shift = gauge_shift(cfg, grid, potential, pil)
        static = None
        if gpot is not None and cfg.geodesic_mode == "folded":
            pts = np.stack([m.ravel() for m in grid.mesh()], axis=1)
            gV = gpot.gradient(pts).T.reshape((grid.ndim,) + tuple(grid.shape))
            static = (gpot.on_grid(grid), gV)
        art.metrics["geodesic_gauge_shift"] = shift

        def make_integrators(pil0, pil1):
            # the oracle needs two snapshots for the time derivative of Q
            orc = SnapshotOracle([pil0, pil1], max_keep=2, static=static)
            base, force = orc, (gpot if cfg.geodesic_mode == "force" else None)
            if shift:
                base = GaugeShift(base, shift)
            return orc, [
                GeodesicIntegrator(ExtendedState.from_parts(0.0, q, v, 1.0), base, force, cfg.geodesic_form,
                                   potential_mode=cfg.geodesic_mode, ids=(k,),
                                   provenance=dict(prov, offset=repr(float(off))))
                for k, (q, v, off) in enumerate(zip(launch, v0, cfg.geodesic_offsets))
            ]
    writer = SnapshotWriter(run_dir / "snapshots", cfg.snapshot_every, cfg.scenario_id) if run_dir else None
    if writer:
        writer(field0, 0)

    field = field0
    for step in range(1, cfg.n_steps + 1):
        field = prop.step(field)
        nxt = pilot.derive_pilot(field, with_Q=need_q, v_max=v_max)
        if len(bundle):
            prev = bundle.current
            pilot.step_bohmian(bundle, pil, nxt, cfg.dt)
            for r in detectors:
                record_crossings(r, prev, bundle.current, ~bundle.terminated)
        if matched is not None:
            pilot.step_bohmian(matched, pil, nxt, cfg.dt)
            if integrators is None:
                oracle, integrators = make_integrators(pil, nxt)
            else:
                oracle.push(nxt)
            for integ in integrators:
                integ.advance_to(field.time, cfg.geodesic_dtau)
        for f in flux:
            f(field, step)
        if writer:
            writer(field, step)
        pil = nxt
    for f in flux:
        f.finalize()
    for r in detectors:
        r.n_trajectories = len(bundle)
    art.field, art.bohmian, art.matched = field, bundle, matched
    art.detectors = detectors
    art.snapshots = writer.paths if writer else []
    m = art.metrics
    m["norm_final"] = field.norm()
    m["time_final"] = field.time
    if len(bundle) and cfg.traj_mode == "density_sampled":
        alive = ~bundle.terminated
        m["n_alive"] = int(alive.sum())
        # trajectories stop at the interior boundary, so compare against the
        # part of |psi|^2 that is still inside it
        rho = field.density()
        if not grid.periodic:
            pts = np.stack([x.ravel() for x in grid.mesh()], axis=1)
            rho = np.where(grid.interior(pts).reshape(grid.shape), rho, 0.0)
        if alive.any():
            for ax in range(grid.ndim):
                m[f"equivariance_l1_axis{ax}"] = pilot.marginal_l1(bundle.current[alive], field, ax,
                                                                   density=rho)[0]
    if integrators:
        art.geodesics = [i.bundle for i in integrators]
        for i, integ in enumerate(integrators):
            m[f"geodesic{i}_terminated"] = integ.reason
            L = np.asarray(integ.bundle.extra.get("Lambda", [[integ.Lambda0]]))[:, 0]
            m[f"geodesic{i}_lambda_drift"] = float(np.max(np.abs(L - integ.Lambda0)))
        labels = [f"offset {off / cfg.sigma:+.2f} sigma" for off in cfg.geodesic_offsets]
        art.equivalence = compare_pictures(matched, art.geodesics, list(range(len(integrators))),
                                           float(grid.h.max()), labels=labels)
        art.equivalence.l1 = {k: v for k, v in m.items() if k.startswith("equivariance")}
        ang_g, ang_b = [], []
        for k, gb in enumerate(art.geodesics):
            ang_g.append(_deflection(gb.path(0), cfg))
            ang_b.append(_deflection(matched.path(k), cfg))
        art.equivalence.geodesic_angles = np.array(ang_g)
        art.equivalence.bohmian_angles = np.array(ang_b)
    if cfg.kind == "double_slit":
        thick = cfg.potential["thickness"]
        m["lobes_past_slab"] = count_lobes(field.density(), grid, cfg, cfg.potential["plane"] + thick)
    _fringes(cfg, art)


def gauge_shift(cfg: ScenarioConfig, grid, potential, pil0):
    """Constant ``c`` of the gauge term ``S = c t`` for the geodesics.

    ``auto`` takes the largest ``Q + V`` on the initial grid plus ten times the
    incident kinetic energy, which keeps ``Lambda`` positive along paths that
    slow down in front of barriers.
    """
    g = cfg.geodesic_gauge.strip().lower()
    if g in ("0", "none", "off"):
        return 0.0
    if g != "auto":
        try:
            return float(g)
        except ValueError:
            raise ConfigError(f"geodesic gauge must be auto, none or a number, got {g!r}") from None
    V = np.zeros(grid.shape) if isinstance(potential, Free) else potential.on_grid(grid)
    Qv = np.where(pil0.node_mask, -np.inf, pil0.Q + V)
    return float(max(Qv.max(), 0.0) + 10.0 * 0.5 * cfg.k_abs ** 2)


def _deflection(path, cfg: ScenarioConfig):
    """Angle (deg) of the final direction of travel relative to the beam axis."""
    if len(path) < 3:
        return float("nan")
    d = path[-1] - path[-3]
    return float(np.degrees(np.arctan2(d[cfg.transverse_axis], d[cfg.beam_axis])))


def _fringes(cfg: ScenarioConfig, art: RunArtifacts):
    lam = cfg.wavelength if cfg.k_abs > 0 else float("nan")
    for r in art.detectors:
        for src in ("flux", "counts"):
            if src == "counts" and r.empty:
                continue
            rep = fringe_analysis(r, lam, cfg.d_candidates or None, cfg.prominence, src)
            art.fringes.append((r, rep))
        if not r.empty:
            art.metrics[f"detector_{r.distance:.4g}_dual_mode_l1"] = r.dual_mode_l1()
        rep = [f for rr, f in art.fringes if rr is r and f.source == "flux"][0]
        c, f1 = peak_masses(r, rep)
        art.metrics[f"detector_{r.distance:.4g}_central_mass"] = c
        art.metrics[f"detector_{r.distance:.4g}_first_order_mass"] = f1


def _run_two_body(cfg: ScenarioConfig, art: RunArtifacts, potential, run_dir):
    if cfg.geodesic_enabled:
        raise ConfigError("geodesics are implemented for one-body scenarios only")
    grid = art.grid
    p = cfg.potential
    phi_G = fields.init_gaussian(grid, cfg.center, cfg.k0, cfg.sigma)
    phi_1s = fields.init_1s(grid, p["center"], a=p["a"], Z=p["Z"])
    conf = PropagatorConfig(cfg.scheme, cfg.dt)
    pa, pb = Propagator(grid, potential, conf), Propagator(grid, potential, conf)
    tb = twobody.symmetrize(phi_G, phi_1s)
    m = art.metrics
    m["overlap_S"] = tb.S
    m["literal_prefactor_norm"] = tb.literal_norm
    m["renormalized_norm"] = tb.norm()
    v_max = cfg.v_max_factor * cfg.k_abs
    stepper = TwoBodyStepper(grid, v_max)
    n = grid.ndim
    if cfg.traj_count:
        q1 = _initial_positions(cfg, phi_G, grid)
        q2 = np.repeat(np.asarray(p["center"], float)[None], len(q1), axis=0)
        q = np.concatenate([q1, q2], axis=1)
    else:
        q = np.zeros((0, 2 * n))
    prov = dict(_provenance(cfg, grid), **twobody.provenance(tb))
    prov["partner_start"] = "bound electron at the proton position"
    prep = stepper.prepare(tb)
    bundle = pilot.TrajectoryBundle(q, 0.0, "bohmian", provenance=prov,
                                    velocities=stepper.velocity(prep, q)[0] if len(q) else None)
    writers = []
    if run_dir:
        writers = [SnapshotWriter(run_dir / "snapshots", cfg.snapshot_every, cfg.scenario_id, 2, tag)
                   for tag in ("G", "1s")]
        writers[0](phi_G, 0)
        writers[1](phi_1s, 0)
    a, b = phi_G, phi_1s
    for step in range(1, cfg.n_steps + 1):
        a, b = pa.step(a), pb.step(b)
        tb_next = twobody.symmetrize(a, b)
        nxt = stepper.prepare(tb_next)
        if len(bundle):
            stepper.step(bundle, prep, nxt, a.time - cfg.dt, cfg.dt)
        if writers:
            writers[0](a, step)
            writers[1](b, step)
        prep, tb = nxt, tb_next
    art.orbitals = (a, b)
    art.bohmian = bundle
    art.snapshots = [pth for w in writers for pth in w.paths]
    rho = one_body_density(tb)
    art.field = fields.WaveField(grid, np.sqrt(rho), a.time)
    m["time_final"] = a.time
    m["norm_final_G"] = a.norm()
    m["norm_final_1s"] = b.norm()
    m["overlap_S_final"] = tb.S
    m["density_mirror_asymmetry"] = mirror_asymmetry(rho, grid, cfg.transverse_axis, target_axis(cfg))
    if len(bundle):
        m["fan_mirror_error_h"] = fan_mirror_error(bundle, cfg, grid)


def one_body_density(tb: twobody.TwoBodyField):
    """Electron density 2 * int |psi(q, q2)|^2 dq2 from the orbitals."""
    a, b = tb.phi_a.values, tb.phi_b.values
    c = tb.prefactor
    na = np.vdot(a, a).real * tb.grid.dV
    nb = np.vdot(b, b).real * tb.grid.dV
    return 2.0 * c * c * (np.abs(a) ** 2 * nb + np.abs(b) ** 2 * na + 2.0 * np.real(np.conj(a) * b * np.conj(tb.S)))


def fan_mirror_error(bundle, cfg: ScenarioConfig, grid):
    """Max distance (in h) between each trajectory of particle 1 and the mirror
    image of its partner launched at the reflected position."""
    tr = cfg.transverse_axis
    axis = target_axis(cfg)
    q0 = bundle.positions[0][:, tr]
    mirror_of = np.array([int(np.argmin(np.abs(q0 - (2 * axis - y)))) for y in q0])
    worst = 0.0
    for qn in bundle.positions:
        a = qn[:, : grid.ndim].copy()
        b = qn[mirror_of, : grid.ndim].copy()
        b[:, tr] = 2 * axis - b[:, tr]
        worst = max(worst, float(np.max(np.linalg.norm(a - b, axis=1))))
    return worst / float(grid.h.max())


# --------------------------------------------------------------------- report

def build_report(art: RunArtifacts) -> str:
    cfg = art.config
    g = art.grid
    L = []
    L.append(f"scenario {cfg.name}  id {cfg.scenario_id}")
    L.append("status: complete")
    L.append(f"threads: {cfg.threads}  seed: {cfg.seed}")
    L.append(f"grid: {'x'.join(map(str, g.shape))} points, box {', '.join(f'{b:.6g}' for b in g.box)} bohr, "
             f"h = {', '.join(f'{h:.6g}' for h in g.h)} bohr, boundary {g.spec.boundary}")
    L.append(f"propagation: {cfg.scheme}, dt = {cfg.dt:g} a.u., {cfg.n_steps} steps, "
             f"T = {cfg.dt * cfg.n_steps:g} a.u.")
    if cfg.k_abs > 0:
        L.append(f"incident packet: |k0| = {cfg.k_abs:.6g} 1/bohr ({cfg.k_abs / BOHR_ANGSTROM:.4g} 1/angstrom), "
                 f"lambda_dB = {cfg.wavelength:.6g} bohr ({length_from_au(cfg.wavelength, 'angstrom'):.4g} angstrom), "
                 f"E = {0.5 * cfg.k_abs ** 2:.6g} Ha")
    L.append(f"initial centre: ({', '.join(f'{c:.6g}' for c in cfg.center)}) bohr, sigma = {cfg.sigma:.6g} bohr, "
             f"impact parameter b = {cfg.b:.6g} bohr ({length_from_au(cfg.b, 'angstrom'):.4g} angstrom)")
    p = cfg.potential
    if p["kind"] == "slab_slits":
        s = slit_intervals(cfg)
        L.append(f"slab: plane {p['plane']:g}, thickness {p['thickness']:.4g} bohr, V0 = {p['V0']:.6g} Ha, "
                 f"smoothing {p['smoothing']:.4g} bohr; slits " +
                 ", ".join(f"[{lo:.4f}, {hi:.4f}]" for lo, hi in s) + " bohr")
    elif p["kind"] == "soft_coulomb":
        L.append(f"soft-Coulomb centre ({', '.join(f'{c:g}' for c in p['center'])}), Z = {p['Z']:g}, a = {p['a']:g} bohr")
    for key in sorted(art.metrics):
        val = art.metrics[key]
        if isinstance(val, complex):
            L.append(f"{key}: {val.real:.6e}{val.imag:+.6e}j")
        elif isinstance(val, float):
            L.append(f"{key}: {val:.6g}")
        else:
            L.append(f"{key}: {val}")
    if art.bohmian is not None and len(art.bohmian):
        b = art.bohmian
        L.append(f"Bohmian trajectories: {len(b)} ({cfg.traj_mode}), terminated {int(b.terminated.sum())}, "
                 f"flagged near nodes {int(b.flagged.sum())}")
    for r in art.detectors:
        L.append(f"detector at {r.distance:.6g} bohr ({length_from_au(r.distance, 'angstrom'):.4g} angstrom) "
                 f"behind the reference plane, {len(r.counts)} bins of {r.bin_width:.4g} bohr; "
                 f"crossings {r.n_crossed}/{r.n_trajectories}" + ("  [no crossings]" if r.empty else ""))
    for r, rep in art.fringes:
        L.append(f"[detector {length_from_au(r.distance, 'angstrom'):.4g} angstrom] " + rep.lines()[0])
        L.extend(rep.lines()[1:])
    if art.equivalence is not None:
        e = art.equivalence
        L.extend(e.lines())
        for k, (ag, ab) in enumerate(zip(e.geodesic_angles, e.bohmian_angles)):
            L.append(f"  final deflection, {e.labels[k]}: geodesic {ag:+.2f} deg, Bohmian {ab:+.2f} deg")
    if cfg.kind == "double_slit":
        L.append("note: the primary detector sits 5.82 angstrom behind the slits; the 2 angstrom plane is "
                 "recorded alongside it and ships as a separate preset.")
    if cfg.kind == "hydrogen":
        L.append(f"note: two-electron state from independently propagated orbitals ({twobody.APPROXIMATION}), "
                 "spin singlet carried as a tag; the literal prefactor norm above is renormalized to 1.")
    return "\n".join(L) + "\n"


def _write_outputs(art: RunArtifacts):
    d = art.run_dir
    if art.bohmian is not None:
        art.bohmian.write(d / "trajectories" / "bohmian.tsv")
    if art.matched is not None:
        art.matched.write(d / "trajectories" / "matched_bohmian.tsv")
    for k, gb in enumerate(art.geodesics):
        gb.write(d / "trajectories" / f"geodesic_{k}.tsv")
    if art.detectors:
        text = "".join(r.table() for r in art.detectors)
        (d / "detector.tsv").write_text(text, encoding="utf-8", newline="\n")
    else:
        (d / "detector.tsv").write_text("# no detector configured\n", encoding="utf-8", newline="\n")
    if art.equivalence is not None:
        e = art.equivalence
        lines = ["# t " + " ".join(f"dev{k}_h" for k in range(e.deviation.shape[1]))]
        for t, row in zip(e.times, e.deviation):
            lines.append(f"{t:.17g} " + " ".join(f"{v:.17g}" for v in row))
        (d / "deviation.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    (d / "report.txt").write_text(art.report, encoding="utf-8", newline="\n")
