"""Detector screen: trajectory first crossings and time-integrated probability
flux through a plane normal to the beam axis, plus fringe-peak extraction."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .. import fields
from ..errors import ConfigError, OutOfBoxError
from ..units import length_from_au, length_to_au

REF_D1 = length_to_au(2.96, "angstrom")
REF_D2 = length_to_au(7.94, "angstrom")
REF_BAND_DEG = (20.0, 47.0)
REF_FIRST_PEAK_DEG = 30.0


@dataclass
class DetectorRecord:
    plane: float                 # coordinate along the beam axis
    distance: float              # from the reference (slit) plane
    edges: np.ndarray            # transverse bin edges
    axis_position: float = 0.0   # transverse coordinate of the symmetry axis
    beam_axis: int = 0
    transverse_axis: int = 1
    counts: np.ndarray = None
    flux: np.ndarray = None
    n_trajectories: int = 0
    crossed: np.ndarray = field(default=None, repr=False)
    crossing_positions: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, float)
        nb = len(self.edges) - 1
        if nb < 1:
            raise ConfigError("detector needs at least one bin")
        if self.counts is None:
            self.counts = np.zeros(nb, dtype=np.int64)
        if self.flux is None:
            self.flux = np.zeros(nb)

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def bin_width(self):
        return float(np.mean(np.diff(self.edges)))

    @property
    def angles(self):
        return np.degrees(np.arctan2(self.centers - self.axis_position, self.distance))

    @property
    def n_crossed(self):
        return int(self.counts.sum())

    @property
    def empty(self):
        return self.n_crossed == 0

    def count_distribution(self):
        n = self.counts.sum()
        return self.counts / n if n else np.zeros_like(self.flux)

    def flux_distribution(self):
        pos = np.clip(self.flux, 0.0, None)
        s = pos.sum()
        return pos / s if s > 0 else np.zeros_like(pos)

    def dual_mode_l1(self):
        return float(np.abs(self.count_distribution() - self.flux_distribution()).sum())

    def merge(self, other: "DetectorRecord"):
        if not np.array_equal(self.edges, other.edges) or self.plane != other.plane:
            raise ConfigError("cannot merge detector records with different geometry")
        self.counts = self.counts + other.counts
        self.flux = self.flux + other.flux
        self.n_trajectories += other.n_trajectories
        return self

    def table(self, length_unit="bohr"):
        """Plain-text table (UTF-8, LF) with a fixed column order."""
        lines = [f"# plane={self.plane!r} distance={self.distance!r} axis={self.axis_position!r} "
                 f"beam_axis={self.beam_axis} transverse_axis={self.transverse_axis} "
                 f"n_trajectories={self.n_trajectories} n_crossed={self.n_crossed} units=bohr",
                 "# bin lo hi center angle_deg counts flux"]
        for i, (lo, hi, c, a, n, f) in enumerate(zip(self.edges[:-1], self.edges[1:], self.centers, self.angles,
                                                      self.counts, self.flux)):
            lines.append(f"{i} {lo:.17g} {hi:.17g} {c:.17g} {a:.17g} {int(n)} {f:.17g}")
        return "\n".join(lines) + "\n"


def make_record(grid, plane, distance, bins, axis_position=0.0, beam_axis=0, transverse_axis=1, span=None):
    """Record with ``bins`` equal bins over the transverse extent (the unmasked
    interior for absorbing grids, or ``span = (lo, hi)``)."""
    if not grid.origin[beam_axis] <= plane <= grid.upper[beam_axis]:
        raise OutOfBoxError(f"detector plane {plane:.4g} lies outside the box")
    if span is None:
        lo, hi = grid.origin[transverse_axis], grid.upper[transverse_axis]
        if not grid.periodic:
            rim = grid.spec.rim_fraction * grid.box[transverse_axis]
            lo, hi = grid.origin[transverse_axis] + rim, grid.origin[transverse_axis] + grid.box[transverse_axis] - rim
        span = (lo, hi)
    return DetectorRecord(plane, distance, np.linspace(span[0], span[1], int(bins) + 1), axis_position,
                          beam_axis, transverse_axis)


class FluxAccumulator:
    """Observer integrating the beam-axis probability current ``Im(psi* d psi)``
    through the plane over time (trapezoid rule), on the transverse grid nodes."""

    def __init__(self, record: DetectorRecord, grid, dt):
        self.record, self.grid, self.dt = record, grid, dt
        ax = record.beam_axis
        x = grid.axes[ax]
        s = (record.plane - x[0]) / grid.h[ax]
        self.i0 = int(min(np.floor(s), len(x) - 2))
        self.w = s - self.i0
        self.line = np.zeros(grid.shape[record.transverse_axis])
        self._last = None

    def _current(self, field):
        ax, tr = self.record.beam_axis, self.record.transverse_axis
        psi = field.values
        d = fields.derivative(psi, self.grid, ax, 1)
        j = np.imag(np.conj(psi) * d)
        j = np.moveaxis(j, ax, 0)
        line = (1 - self.w) * j[self.i0] + self.w * j[self.i0 + 1]
        # integrate over any remaining axes except the transverse one
        tr_new = tr - 1 if tr > ax else tr
        other = tuple(a for a in range(line.ndim) if a != tr_new)
        if other:
            h = np.prod([self.grid.h[a] for a in range(self.grid.ndim) if a not in (ax, tr)])
            line = line.sum(axis=other) * h
        return line

    def __call__(self, field, step=None):
        cur = self._current(field)
        if self._last is not None:
            self.line += 0.5 * self.dt * (cur + self._last)
        self._last = cur

    def start(self, field):
        self._last = self._current(field)

    def finalize(self):
        # exact bin integrals of the piecewise-linear flux density, so that bins
        # which are not a multiple of the grid spacing do not alias
        tr = self.record.transverse_axis
        y, j, h = self.grid.axes[tr], self.line, self.grid.h[tr]
        cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (j[1:] + j[:-1]))])
        e = np.clip(self.record.edges, y[0], y[-1])
        i = np.clip(np.searchsorted(y, e, side="right") - 1, 0, len(y) - 2)
        s = e - y[i]
        C = cum[i] + j[i] * s + 0.5 * (j[i + 1] - j[i]) * s * s / h
        self.record.flux = np.diff(C)
        return self.record


def record_crossings(record: DetectorRecord, q_prev, q_new, active=None):
    """Bin the first plane crossing (increasing beam coordinate) of each
    trajectory between two consecutive positions."""
    n = len(q_prev)
    if record.crossed is None:
        record.crossed = np.zeros(n, dtype=bool)
        record.crossing_positions = np.full(n, np.nan)
        record.n_trajectories = n
    ax, tr = record.beam_axis, record.transverse_axis
    a, b = q_prev[:, ax], q_new[:, ax]
    hit = (~record.crossed) & (a < record.plane) & (b >= record.plane)
    if active is not None:
        hit &= active
    if hit.any():
        f = (record.plane - a[hit]) / (b[hit] - a[hit])
        yc = q_prev[hit, tr] + f * (q_new[hit, tr] - q_prev[hit, tr])
        record.crossing_positions[hit] = yc
        record.crossed[hit] = True
        idx = np.searchsorted(record.edges, yc, side="right") - 1
        ok = (idx >= 0) & (idx < len(record.counts))
        np.add.at(record.counts, idx[ok], 1)
    return record


def accumulate_detector(record: DetectorRecord, source, grid=None, dt=None):
    """Add to ``record`` from a trajectory bundle (first crossings along its
    stored path) or from a sequence of wavefields (time-integrated flux)."""
    from ..pilot import TrajectoryBundle

    if isinstance(source, TrajectoryBundle):
        for a, b in zip(source.positions[:-1], source.positions[1:]):
            record_crossings(record, a, b)
        if record.crossed is None:
            record.n_trajectories = len(source)
        return record
    seq = list(source)
    if not seq:
        raise ConfigError("no fields to accumulate")
    g = grid or seq[0].grid
    if dt is None:
        dt = seq[1].time - seq[0].time if len(seq) > 1 else 0.0
    acc = FluxAccumulator(record, g, dt)
    acc.start(seq[0])
    for f in seq[1:]:
        acc(f)
    flux_before = record.flux.copy()
    acc.finalize()
    record.flux = record.flux + flux_before
    return record


# --------------------------------------------------------------------- fringes

@dataclass
class FringeReport:
    source: str
    peak_positions: np.ndarray
    peak_angles: np.ndarray
    peak_heights: np.ndarray
    central_index: int
    first_order: tuple            # (lower angle or nan, upper angle or nan)
    band: tuple
    band_reference: tuple
    first_in_band: bool
    first_near_30: bool
    prominence: float
    diagnostic: str = ""

    def lines(self):
        out = [f"fringe analysis ({self.source}), prominence threshold {100 * self.prominence:.1f}% of max"]
        if self.diagnostic:
            out.append(f"  {self.diagnostic}")
            return out
        for y, a, h in zip(self.peak_positions, self.peak_angles, self.peak_heights):
            out.append(f"  peak at {y:+.4f} bohr  angle {a:+7.2f} deg  height {h:.4f}")
        lo, hi = self.first_order
        out.append(f"  first-order peaks: {lo:+.2f} deg (lower), {hi:+.2f} deg (upper)")
        out.append(f"  predicted band arcsin(lambda/d2)..arcsin(lambda/d1) = {self.band[0]:.1f}..{self.band[1]:.1f} deg"
                   f" (reference {self.band_reference[0]:.0f}..{self.band_reference[1]:.0f})")
        out.append(f"  first-order inside band: {'pass' if self.first_in_band else 'fail'}; "
                   f"within 5 deg of {REF_FIRST_PEAK_DEG:.0f}: {'pass' if self.first_near_30 else 'fail'}")
        return out


def predicted_band(wavelength, d_candidates=(REF_D1, REF_D2)):
    d_small, d_large = min(d_candidates), max(d_candidates)
    return (math.degrees(math.asin(min(1.0, wavelength / d_large))),
            math.degrees(math.asin(min(1.0, wavelength / d_small))))


def _refine(profile, i):
    if 0 < i < len(profile) - 1:
        a, b, c = profile[i - 1], profile[i], profile[i + 1]
        den = a - 2 * b + c
        if den < 0:
            return float(np.clip(0.5 * (a - c) / den, -0.5, 0.5))
    return 0.0


def fringe_analysis(record: DetectorRecord, wavelength, d_candidates=None, prominence=0.05, source="flux"):
    """Peaks of the detector profile and their angles atan2(offset, distance).

    The central peak is the one nearest 0 degrees; the first-order peaks are
    its nearest neighbours on either side.
    """
    d_candidates = tuple(d_candidates) if d_candidates else (REF_D1, REF_D2)
    band = predicted_band(wavelength, d_candidates)
    profile = record.flux_distribution() if source == "flux" else record.count_distribution()
    empty = FringeReport(source, np.array([]), np.array([]), np.array([]), -1, (np.nan, np.nan), band,
                         REF_BAND_DEG, False, False, prominence)
    if not profile.max() > 0:
        empty.diagnostic = "empty detector record: no peaks"
        return empty
    p = profile / profile.max()
    idx, _ = find_peaks(p, prominence=prominence)
    if len(idx) == 0:
        empty.diagnostic = "no peaks above the prominence threshold"
        return empty
    w = record.bin_width
    pos = np.array([record.centers[i] + _refine(p, i) * w for i in idx])
    ang = np.degrees(np.arctan2(pos - record.axis_position, record.distance))
    central = int(np.argmin(np.abs(ang)))
    lower = ang[central - 1] if central > 0 else np.nan
    upper = ang[central + 1] if central + 1 < len(ang) else np.nan
    firsts = [a for a in (lower, upper) if np.isfinite(a)]
    in_band = bool(firsts) and all(band[0] <= abs(a) <= band[1] for a in firsts)
    near = bool(firsts) and all(abs(abs(a) - REF_FIRST_PEAK_DEG) <= 5.0 for a in firsts)
    return FringeReport(source, pos, ang, p[idx], central, (float(lower), float(upper)), band, REF_BAND_DEG,
                        in_band, near, prominence)


def peak_masses(record: DetectorRecord, report: FringeReport, source="flux"):
    """Probability in the central and first-order lobes, split at the profile minima."""
    profile = record.flux_distribution() if source == "flux" else record.count_distribution()
    if report.central_index < 0:
        return np.nan, np.nan
    centers = record.centers
    peaks = np.searchsorted(centers, report.peak_positions)
    bounds = [0]
    for a, b in zip(peaks[:-1], peaks[1:]):
        bounds.append(a + int(np.argmin(profile[a:b + 1])))
    bounds.append(len(profile))
    lobes = [profile[bounds[i]:bounds[i + 1]].sum() for i in range(len(peaks))]
    c = report.central_index
    first = [lobes[i] for i in (c - 1, c + 1) if 0 <= i < len(lobes)]
    return float(lobes[c]), float(max(first) if first else np.nan)


def angstrom(x):
    return length_from_au(x, "angstrom")
