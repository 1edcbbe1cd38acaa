"""Scenario configuration: INI-style sections parsed with :mod:`configparser`,
converted to atomic units, and hashed to a stable scenario id.

Lengths are read in the ``[units] length`` unit, wavenumbers per that unit
(or from ``velocity_mps``), times in ``[units] time``.  The scenario id is the
SHA-256 of the canonicalized text (sections and keys sorted, values stripped).
"""

from __future__ import annotations

import configparser
import hashlib
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .. import units
from ..errors import ConfigError

SECTIONS = ("units", "grid", "potential", "initial", "run", "trajectories", "geodesic", "detector",
            "output")


def _floats(text, n=None, what="value"):
    try:
        vals = tuple(float(v) for v in str(text).replace(",", " ").split())
    except ValueError:
        raise ConfigError(f"cannot parse {what} {text!r} as numbers") from None
    if n is not None and len(vals) != n:
        raise ConfigError(f"{what} needs {n} numbers, got {len(vals)}")
    return vals


_LENGTH_UNITS = ("bohr", "au", "angstrom")


def _lengths(text, default_unit, n=None, what="length"):
    """Numbers with an optional trailing unit word (``96 bohr``, ``2.96 angstrom``)."""
    tokens = str(text).replace(",", " ").split()
    unit = default_unit
    if tokens and tokens[-1].lower() in _LENGTH_UNITS:
        unit = tokens.pop().lower()
    vals = _floats(" ".join(tokens), n, what)
    return tuple(units.length_to_au(v, unit) for v in vals)


def _wavenumber(text, default_unit):
    tokens = str(text).split()
    unit = default_unit
    if len(tokens) == 2 and tokens[1].lower().startswith("1/"):
        unit = tokens[1][2:].lower()
        if unit not in _LENGTH_UNITS:
            raise ConfigError(f"unknown wavenumber unit {tokens[1]!r}")
    elif len(tokens) != 1:
        raise ConfigError(f"cannot parse wavenumber {text!r}")
    return units.wavenumber_to_au(_floats(tokens[0], 1, "k0")[0], unit)


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"cannot parse {text!r} as a boolean")


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    kind: str                       # free | hydrogen | double_slit | custom
    dims: tuple
    box: tuple
    origin: tuple
    boundary: str
    potential: dict
    center: tuple
    k0: tuple
    sigma: float
    b: float
    beam_axis: int
    transverse_axis: int
    scheme: str
    dt: float
    n_steps: int
    snapshot_every: int
    threads: int
    traj_mode: str
    traj_count: int
    seed: int
    line_length: float
    v_max_factor: float
    geodesic_enabled: bool
    geodesic_form: str
    geodesic_mode: str
    geodesic_offsets: tuple
    geodesic_dtau: float
    geodesic_gauge: str
    detector_distance: float
    detector_bins: int
    prominence: float
    d_candidates: tuple
    alternate_distance: float
    output_dir: str
    text: str = field(default="", repr=False)
    length_unit: str = "bohr"

    @property
    def scenario_id(self):
        return scenario_hash(self.text)

    @property
    def ndim(self):
        return len(self.dims)

    @property
    def k_abs(self):
        return float(np.linalg.norm(self.k0))

    @property
    def wavelength(self):
        return units.de_broglie_wavelength(self.k_abs)

    def with_overrides(self, **kw):
        return replace(self, **kw)


_UNHASHED = {("output", "dir")}


def canonical_text(cp: configparser.ConfigParser):
    lines = []
    for sec in sorted(cp.sections()):
        lines.append(f"[{sec}]")
        for key in sorted(cp[sec]):
            if (sec, key) in _UNHASHED:
                continue
            lines.append(f"{key} = {' '.join(cp[sec][key].split())}")
    return "\n".join(lines) + "\n"


def scenario_hash(text):
    return hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]


def read_parser(source):
    """Parse a path, a preset name or raw INI text."""
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    if isinstance(source, configparser.ConfigParser):
        return source
    text = None
    p = Path(str(source))
    if "\n" in str(source):
        text = str(source)
    elif p.is_file():
        text = p.read_text(encoding="utf-8")
    else:
        from .scenario import preset_path
        pp = preset_path(str(source))
        if pp is None:
            raise ConfigError(f"no such config file or preset: {source}")
        text = pp.read_text(encoding="utf-8")
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    unknown = [s for s in cp.sections() if s not in SECTIONS]
    if unknown:
        raise ConfigError(f"unknown config sections {unknown}")
    return cp


def load_config(source, seed=None, threads=None, out=None) -> ScenarioConfig:
    cp = read_parser(source)
    if seed is not None:
        if not cp.has_section("trajectories"):
            cp.add_section("trajectories")
        cp.set("trajectories", "seed", str(int(seed)))
    if threads is not None:
        if not cp.has_section("run"):
            cp.add_section("run")
        cp.set("run", "threads", str(int(threads)))
    if out is not None:
        if not cp.has_section("output"):
            cp.add_section("output")
        cp.set("output", "dir", str(out))
    return parse(cp)


def parse(cp: configparser.ConfigParser) -> ScenarioConfig:
    def get(sec, key, default=None):
        if cp.has_option(sec, key):
            return cp.get(sec, key).strip()
        if default is None:
            raise ConfigError(f"missing required option [{sec}] {key}")
        return default

    lu = get("units", "length", "bohr")
    tu = get("units", "time", "au")
    try:
        units.length_to_au(1.0, lu)
        units.time_to_au(1.0, tu)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    def L1(sec, key, default=None, what=None):
        return _lengths(get(sec, key, default), lu, 1, what or f"[{sec}] {key}")[0]

    dims = tuple(int(v) for v in _floats(get("grid", "dims"), what="grid dims"))
    nd = len(dims)
    box = _lengths(get("grid", "box"), lu, nd, "grid box")
    origin_txt = get("grid", "origin", "centered")
    origin = tuple(-0.5 * b for b in box) if origin_txt == "centered" else _lengths(
        origin_txt, lu, nd, "grid origin")
    boundary = get("grid", "boundary", "periodic")

    beam = int(get("initial", "beam_axis", "0"))
    trans = int(get("initial", "transverse_axis", "1" if nd > 1 else "0"))
    if not (0 <= beam < nd and 0 <= trans < nd):
        raise ConfigError("beam/transverse axis out of range")

    # incident packet
    k_txt = get("initial", "k0", "")
    v_txt = get("initial", "velocity_mps", "")
    if k_txt and v_txt:
        raise ConfigError("give either initial k0 or velocity_mps, not both")
    if v_txt:
        k_abs = units.velocity_mps_to_au(float(v_txt))
    elif k_txt:
        k_abs = _wavenumber(k_txt, lu)
    else:
        k_abs = 0.0
    k0 = [0.0] * nd
    k0[beam] = k_abs
    sigma = L1("initial", "sigma")

    kind = get("potential", "kind", "free")
    pot = {"kind": kind}
    target_axis = 0.0
    if kind == "free":
        pass
    elif kind == "soft_coulomb":
        c = _lengths(get("potential", "center", " ".join(["0"] * nd)), lu, nd, "potential center")
        pot.update(center=c, Z=float(get("potential", "Z", "1")),
                   a=L1("potential", "a", "0.5 bohr"),
                   with_electron=_bool(get("potential", "bound_electron", "true")))
        target_axis = pot["center"][trans]
    elif kind == "slab_slits":
        if nd < 2:
            raise ConfigError("slit screens need at least two dimensions")
        if cp.has_option("potential", "inner_gap"):
            geom = ("edges", L1("potential", "inner_gap"), L1("potential", "outer_span"))
        else:
            geom = ("width", L1("potential", "slit_width"), L1("potential", "separation"))
        E = 0.5 * k_abs**2
        V0_txt = get("potential", "V0", "")
        V0 = float(V0_txt) if V0_txt else float(get("potential", "V0_factor", "10")) * E
        pot.update(plane=L1("potential", "plane", "0"), thickness=L1("potential", "thickness", "2 bohr"),
                   V0=V0, smoothing=L1("potential", "smoothing", "0.5 bohr"),
                   geometry=geom, axis_position=L1("potential", "axis", "0"))
        target_axis = pot["axis_position"]
    else:
        raise ConfigError(f"unknown potential kind {kind!r}")

    b_txt = get("initial", "b", "0")
    if b_txt in ("slit_edge", "slit_center"):
        # geometry-relative impact parameters: lower edge or midpoint of the upper slit
        if kind != "slab_slits":
            raise ConfigError(f"b = {b_txt} needs a slab_slits potential")
        if geom[0] == "edges":
            lo, hi = geom[1], geom[2]
        else:
            lo, hi = geom[2], geom[2] + 2 * geom[1]
        edge, outer = 0.5 * lo, 0.5 * hi
        b = edge if b_txt == "slit_edge" else 0.5 * (edge + outer)
    else:
        b = _lengths(b_txt, lu, 1, "[initial] b")[0]
    center = list(_lengths(get("initial", "center"), lu, nd, "initial center"))
    center[trans] = target_axis + b if nd > 1 else center[trans]

    dt = units.time_to_au(float(get("run", "dt", "0.1")), tu)
    if cp.has_option("run", "duration"):
        n_steps = int(round(units.time_to_au(float(get("run", "duration")), tu) / dt))
    else:
        n_steps = int(get("run", "n_steps", "100"))
    if n_steps < 1:
        raise ConfigError("the run needs at least one step")

    mode = get("trajectories", "mode", "density_sampled")
    count = int(get("trajectories", "count", "0"))
    if count < 0:
        raise ConfigError("trajectory count must be non-negative")

    gal = get("geodesic", "offsets", "0")
    d_txt = get("detector", "d_candidates", "")
    alt = get("detector", "alternate_distance", "")

    return ScenarioConfig(
        name=get("output", "name", kind),
        kind={"free": "free", "soft_coulomb": "hydrogen", "slab_slits": "double_slit"}[kind],
        dims=dims, box=box, origin=origin, boundary=boundary, potential=pot,
        center=tuple(center), k0=tuple(k0), sigma=sigma, b=b, beam_axis=beam, transverse_axis=trans,
        scheme=get("run", "scheme", "split_operator"), dt=dt, n_steps=n_steps,
        snapshot_every=int(get("run", "snapshot_every", "0")),
        threads=int(get("run", "threads", "1")),
        traj_mode=mode, traj_count=count, seed=int(get("trajectories", "seed", "0")),
        line_length=L1("trajectories", "line_length", "nan"),
        v_max_factor=float(get("trajectories", "v_max_factor", "10")),
        geodesic_enabled=_bool(get("geodesic", "enabled", "false")),
        geodesic_form=get("geodesic", "form", "gamma_form"),
        geodesic_mode=get("geodesic", "potential_mode", "folded"),
        geodesic_dtau=units.time_to_au(float(get("geodesic", "dtau", repr(dt))), tu) if cp.has_option(
            "geodesic", "dtau") else dt,
        geodesic_gauge=get("geodesic", "gauge", "auto"),
        geodesic_offsets=tuple(v * sigma for v in _floats(gal, what="geodesic offsets")),
        detector_distance=L1("detector", "distance", "nan"),
        detector_bins=int(get("detector", "bins", "128")),
        prominence=float(get("detector", "prominence", "0.05")),
        d_candidates=_lengths(d_txt, lu, what="d_candidates") if d_txt else (),
        alternate_distance=_lengths(alt, lu, 1)[0] if alt else float("nan"),
        output_dir=get("output", "dir", "runs"),
        text=canonical_text(cp),
        length_unit=lu,
    )
