"""External potentials V(q): free, soft-Coulomb centres, slit screens and sums.

Each potential is a small frozen dataclass that evaluates on a whole grid
(:meth:`on_grid`), at scattered points (``__call__``) and gives the analytic
gradient at points (:meth:`gradient`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import ConfigError

_SQRT_PI = math.sqrt(math.pi)


def _points(points, ndim=None):
    p = np.atleast_2d(np.asarray(points, float))
    if ndim is not None and p.shape[1] != ndim:
        raise ConfigError(f"expected {ndim}-component points, got {p.shape[1]}")
    return p


class Potential:
    kind = "abstract"

    def __call__(self, points):
        raise NotImplementedError

    def gradient(self, points):
        raise NotImplementedError

    def on_grid(self, grid):
        pts = np.stack([x.ravel() for x in grid.mesh()], axis=1)
        return self(pts).reshape(grid.shape)

    def check_dims(self, ndim):
        pass

    def __add__(self, other):
        return SumPotential((self, other))


@dataclass(frozen=True)
class Free(Potential):
    kind = "free"

    def __call__(self, points):
        return np.zeros(len(_points(points)))

    def gradient(self, points):
        return np.zeros_like(_points(points))

    def on_grid(self, grid):
        return np.zeros(grid.shape)


@dataclass(frozen=True)
class SoftCoulomb(Potential):
    """-Z / sqrt(|q - R|^2 + a^2)."""

    center: tuple
    Z: float = 1.0
    a: float = 0.5
    kind = "soft_coulomb"

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in np.atleast_1d(self.center)))
        if not self.a > 0:
            raise ConfigError("soft-Coulomb softening a must be positive")

    def check_dims(self, ndim):
        if len(self.center) != ndim:
            raise ConfigError(f"soft-Coulomb centre has {len(self.center)} components, grid has {ndim}")

    def __call__(self, points):
        d = _points(points, len(self.center)) - np.asarray(self.center)
        return -self.Z / np.sqrt(np.sum(d * d, axis=1) + self.a**2)

    def gradient(self, points):
        d = _points(points, len(self.center)) - np.asarray(self.center)
        s = np.sum(d * d, axis=1) + self.a**2
        return self.Z * d / s[:, None] ** 1.5


def _box_profile(u, lo, hi, s):
    return 0.5 * (erf((u - lo) / s) - erf((u - hi) / s))


def _box_profile_deriv(u, lo, hi, s):
    return (np.exp(-(((u - lo) / s) ** 2)) - np.exp(-(((u - hi) / s) ** 2))) / (s * _SQRT_PI)


@dataclass(frozen=True)
class SlabSlits(Potential):
    """Opaque slab of height ``V0`` normal to ``beam_axis`` centred at ``plane``,
    with openings given as ``(lo, hi)`` intervals along ``transverse_axis``.
    Every edge is an error-function ramp of width ``smoothing``."""

    plane: float
    thickness: float
    V0: float
    slits: tuple
    smoothing: float = 0.5
    beam_axis: int = 0
    transverse_axis: int = 1
    kind = "slab_slits"

    def __post_init__(self):
        slits = tuple(sorted((float(lo), float(hi)) for lo, hi in self.slits))
        object.__setattr__(self, "slits", slits)
        if not self.V0 > 0:
            raise ConfigError("barrier height V0 must be positive")
        if not self.smoothing > 0:
            raise ConfigError("edge smoothing must be positive")
        if not self.thickness > 0:
            raise ConfigError("slab thickness must be positive")
        for lo, hi in slits:
            if not hi > lo:
                raise ConfigError(f"slit interval ({lo}, {hi}) is empty")
        for (_, hi), (lo, _) in zip(slits, slits[1:]):
            if lo < hi:
                raise ConfigError("slit intervals overlap")
        if self.beam_axis == self.transverse_axis:
            raise ConfigError("beam and transverse axes must differ")

    def check_dims(self, ndim):
        if max(self.beam_axis, self.transverse_axis) >= ndim:
            raise ConfigError(f"slab needs at least {max(self.beam_axis, self.transverse_axis) + 1} dimensions")

    def _factors(self, p):
        x = p[:, self.beam_axis]
        y = p[:, self.transverse_axis]
        lo, hi = self.plane - 0.5 * self.thickness, self.plane + 0.5 * self.thickness
        s = self.smoothing
        X = _box_profile(x, lo, hi, s)
        dX = _box_profile_deriv(x, lo, hi, s)
        Y = np.ones_like(y)
        dY = np.zeros_like(y)
        for a, b in self.slits:
            Y -= _box_profile(y, a, b, s)
            dY -= _box_profile_deriv(y, a, b, s)
        return X, dX, Y, dY

    def __call__(self, points):
        p = _points(points)
        self.check_dims(p.shape[1])
        X, _, Y, _ = self._factors(p)
        return self.V0 * X * Y

    def gradient(self, points):
        p = _points(points)
        self.check_dims(p.shape[1])
        X, dX, Y, dY = self._factors(p)
        g = np.zeros_like(p)
        g[:, self.beam_axis] = self.V0 * dX * Y
        g[:, self.transverse_axis] = self.V0 * X * dY
        return g

    @property
    def symmetry_axis(self):
        """Transverse coordinate midway between the outermost slit edges."""
        return 0.5 * (self.slits[0][0] + self.slits[-1][1])


@dataclass(frozen=True)
class SumPotential(Potential):
    terms: tuple = field(default_factory=tuple)
    kind = "sum"

    def check_dims(self, ndim):
        for t in self.terms:
            t.check_dims(ndim)

    def __call__(self, points):
        p = _points(points)
        out = np.zeros(len(p))
        for t in self.terms:
            out = out + t(p)
        return out

    def gradient(self, points):
        p = _points(points)
        out = np.zeros_like(p)
        for t in self.terms:
            out = out + t.gradient(p)
        return out

    def on_grid(self, grid):
        out = np.zeros(grid.shape)
        for t in self.terms:
            out = out + t.on_grid(grid)
        return out


def evaluate(spec: Potential, grid):
    spec.check_dims(grid.ndim)
    return spec.on_grid(grid)


def gradient(spec: Potential, point):
    point = np.asarray(point, float)
    g = spec.gradient(point)
    return g[0] if point.ndim == 1 else g


def double_slit_geometry(inner_gap, outer_span, center=0.0):
    """Two equal slits whose closest edges are ``inner_gap`` apart and whose
    furthest edges are ``outer_span`` apart, symmetric about ``center``."""
    if not outer_span > inner_gap > 0:
        raise ConfigError("need outer_span > inner_gap > 0")
    return ((center - 0.5 * outer_span, center - 0.5 * inner_gap),
            (center + 0.5 * inner_gap, center + 0.5 * outer_span))


def double_slit_from_width(width, separation, center=0.0):
    """Two slits of ``width`` with ``separation`` between their closest edges."""
    return double_slit_geometry(separation, separation + 2.0 * width, center)
