"""Command-line interface: ``qtraj run | check-finsler | analyze | presets | convert``.

Exit status: 0 on success, 1 when a physics stage fails, 2 on configuration
or usage errors.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .. import fields, pilot
from ..errors import ConfigError, QTrajError
from ..finsler import ExtendedState, GeneralizedQ, SnapshotOracle, check_admissibility, metric
from ..potentials import Free
from ..propagator import Propagator, PropagatorConfig
from .config import load_config
from .detector import DetectorRecord, fringe_analysis
from .scenario import build_grid, build_potential, list_presets, preset_description, run_scenario

EXIT_OK, EXIT_PHYSICS, EXIT_CONFIG = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_CONFIG)


def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="override the trajectory seed")
    common.add_argument("--threads", type=int, default=None, help="FFT worker threads")
    common.add_argument("--out", default=None, help="output directory for run directories")
    p = _Parser(prog="qtraj", description="Quantum trajectory scattering simulator")
    sub = p.add_subparsers(dest="command", parser_class=_Parser, required=True)
    r = sub.add_parser("run", parents=[common], help="run a scenario config or preset")
    r.add_argument("config")
    c = sub.add_parser("check-finsler", parents=[common], help="admissibility sweep over sampled states")
    c.add_argument("config")
    c.add_argument("--samples", type=int, default=200)
    a = sub.add_parser("analyze", parents=[common], help="re-run the analysis of a run directory")
    a.add_argument("run_dir")
    sub.add_parser("presets", parents=[common], help="list built-in scenarios")
    v = sub.add_parser("convert", parents=[common], help="binary snapshot to a plain-text table")
    v.add_argument("snapshot")
    v.add_argument("-o", "--output", default=None, help="output file (default: stdout)")
    return p


def cmd_run(args):
    cfg = load_config(args.config, args.seed, args.threads, args.out)
    art = run_scenario(cfg)
    print(art.report, end="")
    print(f"run directory: {art.run_dir}")
    return EXIT_OK


def cmd_presets(args):
    for name in list_presets():
        print(f"{name:32s} {preset_description(name)}")
    return EXIT_OK


def cmd_check_finsler(args):
    """Sample states from |psi(0)|^2 with the Bohmian velocity and y0 = 1, and
    report the admissibility conditions and metric degeneracy counts."""
    cfg = load_config(args.config, args.seed, args.threads, args.out)
    fields.set_threads(cfg.threads)
    grid = build_grid(cfg)
    potential = build_potential(cfg)
    f0 = fields.init_gaussian(grid, cfg.center, cfg.k0, cfg.sigma)
    prop = Propagator(grid, potential, PropagatorConfig(cfg.scheme, cfg.dt))
    f1 = prop.step(f0)
    oracle = SnapshotOracle([pilot.derive_pilot(f0), pilot.derive_pilot(f1)])
    if not isinstance(potential, Free):
        oracle = GeneralizedQ(oracle, potential)
    pts = pilot.sample_initial_positions(f0, args.samples, "density_sampled", cfg.seed)
    pts = pts[grid.interior(pts)]
    vel = pilot.derive_pilot(f0).velocity_at(pts)
    counts = dict(positive=0, bordered_negative=0, energy=0, pd=0, sufficient=0, degenerate=0, n=0)
    worst = 0.0
    for q, v in zip(pts, vel):
        st = ExtendedState.from_parts(0.0, q, v, 1.0)
        rep = check_admissibility(st, oracle, axis=cfg.beam_axis)
        counts["n"] += 1
        counts["positive"] += rep.positive
        counts["bordered_negative"] += rep.bordered_negative
        counts["energy"] += rep.energy_condition
        counts["pd"] += rep.metric_positive_definite
        counts["sufficient"] += rep.sufficient_inequality
        counts["degenerate"] += metric(st, oracle, check=False).degenerate
        worst = max(worst, rep.homogeneity_residual)
    n = counts["n"]
    print(f"scenario {cfg.name}  id {cfg.scenario_id}  sampled states {n} (seed {cfg.seed})")
    print(f"(i) homogeneity: max residual {worst:.3e}")
    print(f"(ii) Lambda > 0: {counts['positive']}/{n}")
    print(f"(iii) bordered determinant < 0: {counts['bordered_negative']}/{n}")
    print(f"     energy condition T + Q' < 0: {counts['energy']}/{n}")
    print(f"     sufficient inequality (printed matrix): {counts['sufficient']}/{n}")
    print(f"     metric positive definite: {counts['pd']}/{n}")
    print(f"     degenerate metric: {counts['degenerate']}/{n}")
    return EXIT_OK


def read_detector_tables(path):
    """Parse ``detector.tsv`` back into records."""
    records = []
    head, rows = None, []

    def flush():
        if head is not None:
            arr = np.array(rows, float).reshape(-1, 7)
            edges = np.append(arr[:, 1], arr[-1, 2]) if len(arr) else np.array([0.0, 1.0])
            rec = DetectorRecord(float(head["plane"]), float(head["distance"]), edges, float(head["axis"]),
                                 int(head["beam_axis"]), int(head["transverse_axis"]),
                                 arr[:, 5].astype(np.int64), arr[:, 6], int(head["n_trajectories"]))
            records.append(rec)

    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if line.startswith("# plane="):
            flush()
            head = dict(tok.split("=", 1) for tok in line[2:].split())
            rows = []
        elif line and not line.startswith("#"):
            rows.append([float(t) for t in line.split()])
    flush()
    return records


def cmd_analyze(args):
    run_dir = Path(args.run_dir)
    if not (run_dir / "config.cfg").is_file():
        raise ConfigError(f"{run_dir} is not a run directory (no config.cfg)")
    cfg = load_config(run_dir / "config.cfg")
    if (run_dir / "INCOMPLETE").exists():
        print("warning: run directory is marked INCOMPLETE")
    print(f"scenario {cfg.name}  id {cfg.scenario_id}")
    tpath = run_dir / "trajectories" / "bohmian.tsv"
    if tpath.is_file():
        b = pilot.read_trajectories(tpath)
        sid = b.provenance.get("scenario_id")
        if sid is not None and sid != cfg.scenario_id:
            raise ConfigError(f"trajectory file id {sid} does not match config id {cfg.scenario_id}")
        print(f"Bohmian trajectories: {len(b)}, time points {len(b.times)}, terminated {int(b.terminated.sum())}")
    dpath = run_dir / "detector.tsv"
    if dpath.is_file():
        lam = cfg.wavelength if cfg.k_abs > 0 else float("nan")
        for rec in read_detector_tables(dpath):
            print(f"detector at {rec.distance:.6g} bohr: {rec.n_crossed} crossings")
            for src in ("flux", "counts"):
                if src == "counts" and rec.empty:
                    continue
                rep = fringe_analysis(rec, lam, cfg.d_candidates or None, cfg.prominence, src)
                print("\n".join(rep.lines()))
            if not rec.empty:
                print(f"dual-mode L1 (counts vs flux) = {rec.dual_mode_l1():.4f}")
    return EXIT_OK


def cmd_convert(args):
    values, grid, time, rank = fields.read_snapshot(args.snapshot)
    mesh = grid.mesh()
    cols = [m.ravel() for m in mesh] + [values.real.ravel(), values.imag.ravel(), (np.abs(values) ** 2).ravel()]
    names = [f"x{i}" for i in range(grid.ndim)] + ["re", "im", "density"]
    head = f"# time={time!r} rank={rank} units=bohr\n# " + " ".join(names) + "\n"
    body = "\n".join(" ".join(f"{v:.17g}" for v in row) for row in zip(*cols)) + "\n"
    if args.output:
        Path(args.output).write_text(head + body, encoding="utf-8", newline="\n")
    else:
        sys.stdout.write(head + body)
    return EXIT_OK


COMMANDS = {"run": cmd_run, "presets": cmd_presets, "check-finsler": cmd_check_finsler,
            "analyze": cmd_analyze, "convert": cmd_convert}


def main(argv=None):
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else EXIT_OK
    try:
        return COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except QTrajError as exc:
        print(f"physics stage failed: {exc}", file=sys.stderr)
        return EXIT_PHYSICS


if __name__ == "__main__":
    sys.exit(main())
