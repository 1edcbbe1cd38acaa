"""Uniform Cartesian grids, complex wavefields and the derivative/sampling
operators everything else is built on.

Coordinates along axis ``d`` are ``origin[d] + i * h[d]`` for ``i = 0..N-1``
with ``h = box_length / N``; spectral wavenumbers use the standard DFT
ordering, so ``k_max = pi / h``.
"""

from __future__ import annotations

import itertools
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.fft as sfft

from .errors import ConfigError, GridBudgetError, NonFiniteFieldError, OutOfBoxError

DEFAULT_BUDGET = 2**26
BOUNDARIES = ("periodic", "absorbing")

_workers = 1


def set_threads(n):
    """Worker count used by every FFT in the package."""
    global _workers
    _workers = max(1, int(n))


def get_threads():
    return _workers


def fftn(a, axes=None):
    return sfft.fftn(a, axes=axes, workers=_workers)


def ifftn(a, axes=None):
    return sfft.ifftn(a, axes=axes, workers=_workers)


@dataclass(frozen=True)
class GridSpec:
    dims: tuple
    box_lengths: tuple
    origin: tuple = None
    boundary: str = "periodic"
    rim_fraction: float = 0.1
    budget: int = DEFAULT_BUDGET

    def __post_init__(self):
        dims = tuple(int(n) for n in np.atleast_1d(self.dims))
        box = tuple(float(b) for b in np.atleast_1d(self.box_lengths))
        origin = (0.0,) * len(dims) if self.origin is None else tuple(
            float(o) for o in np.atleast_1d(self.origin))
        boundary = {"absorbing-mask": "absorbing"}.get(self.boundary, self.boundary)
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "box_lengths", box)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "boundary", boundary)
        if not (len(dims) == len(box) == len(origin)) or not dims:
            raise ConfigError("dims, box_lengths and origin must have equal, nonzero length")
        if boundary not in BOUNDARIES:
            raise ConfigError(f"boundary must be one of {BOUNDARIES}, got {self.boundary!r}")
        if any(n < 8 for n in dims):
            raise ConfigError(f"every axis needs at least 8 points, got {dims}")
        if any(not b > 0 for b in box):
            raise ConfigError(f"box lengths must be positive, got {box}")
        if not 0.0 < self.rim_fraction < 0.5:
            raise ConfigError("rim_fraction must lie in (0, 0.5)")
        total = int(np.prod(dims, dtype=np.int64))
        if total > self.budget:
            raise GridBudgetError(f"grid of {total} points exceeds the budget of {self.budget}")


@dataclass(frozen=True, eq=False)
class Grid:
    spec: GridSpec
    axes: tuple = field(repr=False)
    h: np.ndarray = field(repr=False)
    k: tuple = field(repr=False)

    @property
    def ndim(self):
        return len(self.spec.dims)

    @property
    def shape(self):
        return self.spec.dims

    @property
    def origin(self):
        return np.asarray(self.spec.origin)

    @property
    def box(self):
        return np.asarray(self.spec.box_lengths)

    @property
    def periodic(self):
        return self.spec.boundary == "periodic"

    @property
    def dV(self):
        return float(np.prod(self.h))

    @property
    def k_max(self):
        return np.pi / self.h

    @property
    def upper(self):
        """Coordinate of the last node per axis."""
        return self.origin + (np.asarray(self.shape) - 1) * self.h

    @property
    def center(self):
        return self.origin + 0.5 * self.box

    def mesh(self):
        return np.meshgrid(*self.axes, indexing="ij")

    def k_mesh(self):
        return np.meshgrid(*self.k, indexing="ij")

    def k_squared(self):
        return sum(kk**2 for kk in self.k_mesh())

    def absorbing_mask(self):
        """cos^2 roll-off over a rim of ``rim_fraction`` of the box on each side;
        identically 1 for periodic grids."""
        mask = np.ones(self.shape)
        if self.periodic:
            return mask
        for d, x in enumerate(self.axes):
            rim = self.spec.rim_fraction * self.box[d]
            edge = np.minimum(x - self.origin[d], self.origin[d] + self.box[d] - x)
            m = np.where(edge < rim, np.sin(0.5 * np.pi * np.clip(edge, 0, None) / rim) ** 2, 1.0)
            shape = [1] * self.ndim
            shape[d] = -1
            mask = mask * m.reshape(shape)
        return mask

    def interior(self, points):
        """Boolean per point: inside the unmasked interior (or anywhere, if periodic)."""
        points = np.atleast_2d(points)
        if self.periodic:
            return np.ones(len(points), dtype=bool)
        rim = self.spec.rim_fraction * self.box
        lo = self.origin + rim
        hi = self.origin + self.box - rim
        return np.all((points >= lo) & (points <= hi), axis=1)


def make_grid(spec: GridSpec) -> Grid:
    h = np.asarray(spec.box_lengths) / np.asarray(spec.dims)
    axes = tuple(o + np.arange(n) * hh for o, n, hh in zip(spec.origin, spec.dims, h))
    k = tuple(2.0 * np.pi * sfft.fftfreq(n, d=hh) for n, hh in zip(spec.dims, h))
    return Grid(spec=spec, axes=axes, h=h, k=k)


def grid(dims, box_lengths, origin=None, boundary="periodic", **kw) -> Grid:
    """Shorthand for ``make_grid(GridSpec(...))``."""
    return make_grid(GridSpec(tuple(np.atleast_1d(dims)), tuple(np.atleast_1d(box_lengths)),
                              origin, boundary, **kw))


@dataclass(frozen=True, eq=False)
class WaveField:
    grid: Grid
    values: np.ndarray = field(repr=False)
    time: float = 0.0

    def __post_init__(self):
        values = np.array(self.values, dtype=complex)
        if values.shape != tuple(self.grid.shape):
            raise ConfigError(f"values of shape {values.shape} do not match grid {self.grid.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteFieldError(f"non-finite amplitude in wavefield at t={self.time}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def density(self):
        return np.abs(self.values) ** 2

    def norm(self):
        return float(np.sqrt(np.sum(self.density()) * self.grid.dV))

    def normalized(self):
        return WaveField(self.grid, self.values / self.norm(), self.time)

    def replace(self, values, time=None):
        return WaveField(self.grid, values, self.time if time is None else time)


def init_gaussian(grid: Grid, center, k0, sigma, time=0.0) -> WaveField:
    """Minimum-uncertainty packet exp(-|q-q0|^2 / 4 sigma^2) exp(i k0.(q-q0)).

    ``sigma`` is the position spread of |psi|^2 per axis.
    """
    center = np.broadcast_to(np.asarray(center, float), (grid.ndim,))
    k0 = np.broadcast_to(np.asarray(k0, float), (grid.ndim,))
    if not sigma > 3.0 * grid.h.max():
        raise ConfigError(f"sigma={sigma} is under-resolved; need sigma > 3h = {3 * grid.h.max()}")
    if np.linalg.norm(k0) >= 0.5 * grid.k_max.min():
        raise ConfigError(f"|k0|={np.linalg.norm(k0):.4g} aliases; need < {0.5 * grid.k_max.min():.4g}")
    r2 = np.zeros(grid.shape)
    phase = np.zeros(grid.shape)
    for d, x in enumerate(grid.mesh()):
        r2 += (x - center[d]) ** 2
        phase += k0[d] * (x - center[d])
    psi = np.exp(-r2 / (4.0 * sigma**2) + 1j * phase)
    return WaveField(grid, psi, time).normalized()


def init_1s(grid: Grid, center, a=0.5, Z=1.0, **relax_kw) -> WaveField:
    """Ground state of the soft-Coulomb well -Z/sqrt(|q-R|^2 + a^2) on this grid,
    relaxed in imaginary time (see :func:`qtraj.propagator.relax_ground_state`)."""
    from .potentials import SoftCoulomb
    from .propagator import relax_ground_state

    if not a > 2.0 * grid.h.max():
        raise ConfigError(f"softening a={a} must exceed 2h = {2 * grid.h.max()}")
    center = np.broadcast_to(np.asarray(center, float), (grid.ndim,))
    r = np.sqrt(sum((x - c) ** 2 for x, c in zip(grid.mesh(), center)))
    guess = WaveField(grid, np.exp(-Z * np.sqrt(r**2 + a**2))).normalized()
    return relax_ground_state(guess, SoftCoulomb(center=tuple(center), Z=Z, a=a), **relax_kw)


# --------------------------------------------------------------------- sampling

def _cell_coordinates(grid: Grid, points):
    points = np.asarray(points, float)
    if points.ndim == 1:
        points = points[None, :]
    if points.shape[-1] != grid.ndim:
        raise ConfigError(f"points have {points.shape[-1]} components, grid has {grid.ndim}")
    s = (points - grid.origin) / grid.h
    snapped = np.round(s)
    s = np.where(np.abs(s - snapped) < 1e-9, snapped, s)
    n = np.asarray(grid.shape)
    if grid.periodic:
        s = np.mod(s, n)
        i0 = np.floor(s).astype(np.int64)
        i0 = np.minimum(i0, n - 1)
        f = s - i0
        i1 = (i0 + 1) % n
    else:
        if np.any(s < 0) or np.any(s > n - 1):
            raise OutOfBoxError("sample point outside the grid in absorbing mode")
        i0 = np.minimum(np.floor(s).astype(np.int64), n - 2)
        f = s - i0
        i1 = i0 + 1
    return i0, i1, f


def interpolate(values, grid: Grid, points):
    """Multilinear interpolation of ``values`` (shape ``(..., *grid.shape)``) at
    ``points`` (shape ``(M, ndim)``); returns shape ``(..., M)``.  Exact on nodes."""
    values = np.asarray(values)
    i0, i1, f = _cell_coordinates(grid, points)
    nd = grid.ndim
    out = None
    for corner in itertools.product((0, 1), repeat=nd):
        idx = tuple(np.where(c, i1[:, d], i0[:, d]) for d, c in enumerate(corner))
        w = np.ones(len(f))
        for d, c in enumerate(corner):
            w = w * (f[:, d] if c else 1.0 - f[:, d])
        term = w * values[(Ellipsis, *idx)]
        out = term if out is None else out + term
    return out


def sample(field: WaveField, point):
    """Complex amplitude at one point (scalar) or many points (array)."""
    point = np.asarray(point, float)
    vals = interpolate(field.values, field.grid, point)
    return complex(vals[0]) if point.ndim == 1 else vals


# ------------------------------------------------------------------ derivatives

def _spectral(values, grid: Grid, axis, order):
    k = grid.k[axis]
    shape = [1] * grid.ndim
    shape[axis] = -1
    factor = ((1j * k) ** order).reshape(shape)
    if order % 2 == 1 and grid.shape[axis] % 2 == 0:
        # the Nyquist mode has no well-defined odd derivative
        factor = factor.copy()
        sl = [0] * grid.ndim
        sl[axis] = grid.shape[axis] // 2
        factor[tuple(sl)] = 0.0
    lead = values.ndim - grid.ndim
    return sfft.ifft(sfft.fft(values, axis=lead + axis, workers=_workers) * factor,
                     axis=lead + axis, workers=_workers)


def _central4(values, grid: Grid, axis, order):
    ax = values.ndim - grid.ndim + axis
    h = grid.h[axis]
    p1, m1 = np.roll(values, -1, ax), np.roll(values, 1, ax)
    p2, m2 = np.roll(values, -2, ax), np.roll(values, 2, ax)
    if order == 1:
        return (-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * h)
    return (-p2 + 16.0 * p1 - 30.0 * values + 16.0 * m1 - m2) / (12.0 * h * h)


def derivative(values, grid: Grid, axis, order=1, method="spectral"):
    """d/dq_axis (order 1) or d^2/dq_axis^2 (order 2) of a sampled field.

    Leading batch dimensions are allowed; the trailing dimensions must match
    the grid.  Real input gives real output.
    """
    values = np.asarray(values)
    if values.shape[values.ndim - grid.ndim:] != tuple(grid.shape):
        raise ConfigError(f"field shape {values.shape} does not match grid {grid.shape}")
    if order not in (1, 2):
        raise ConfigError("order must be 1 or 2")
    if method == "spectral":
        out = _spectral(values, grid, axis, order)
    elif method in ("central-4th", "central4"):
        out = _central4(values, grid, axis, order)
    else:
        raise ConfigError(f"unknown derivative method {method!r}")
    return out.real if np.isrealobj(values) else out


def gradient(values, grid: Grid, method="spectral"):
    return np.stack([derivative(values, grid, d, 1, method) for d in range(grid.ndim)])


def laplacian(values, grid: Grid, method="spectral"):
    if method == "spectral":
        out = ifftn(fftn(values, axes=tuple(range(-grid.ndim, 0))) * -grid.k_squared(),
                    axes=tuple(range(-grid.ndim, 0)))
        return out.real if np.isrealobj(values) else out
    return sum(derivative(values, grid, d, 2, method) for d in range(grid.ndim))


# -------------------------------------------------------------------- snapshots

SNAPSHOT_MAGIC = b"QTRJSNAP"
SNAPSHOT_VERSION = 1
UNITS_TAG = b"hartree-atomic\0\0"


def write_snapshot(path, values, grid: Grid, time, rank=1, extra=None):
    """Binary snapshot plus a ``.meta`` key=value sidecar.

    Layout (little-endian): magic[8], version u32, rank u32, ndim u32, pad u32,
    dims u64[ndim], box f64[ndim], origin f64[ndim], time f64, units[16],
    then the amplitudes as interleaved (re, im) float64.
    """
    path = Path(path)
    values = np.ascontiguousarray(values, dtype="<c16")
    nd = grid.ndim
    header = struct.pack(f"<8sIIII{nd}Q{nd}d{nd}dd16s", SNAPSHOT_MAGIC, SNAPSHOT_VERSION,
                         rank, nd, 0, *grid.shape, *grid.box, *grid.origin, float(time), UNITS_TAG)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(values.view("<f8").tobytes())
    meta = {
        "magic": SNAPSHOT_MAGIC.decode(),
        "version": SNAPSHOT_VERSION,
        "rank": rank,
        "dims": ",".join(str(n) for n in grid.shape),
        "box": ",".join(repr(float(b)) for b in grid.box),
        "origin": ",".join(repr(float(o)) for o in grid.origin),
        "boundary": grid.spec.boundary,
        "time": repr(float(time)),
        "units": "hartree-atomic",
    }
    meta.update(extra or {})
    with open(str(path) + ".meta", "w", encoding="utf-8", newline="\n") as fh:
        for key, val in meta.items():
            fh.write(f"{key}={val}\n")
    return path


def read_snapshot(path):
    """Returns ``(values, grid, time, rank)``."""
    data = Path(path).read_bytes()
    magic, version, rank, nd, _ = struct.unpack_from("<8sIIII", data, 0)
    if magic != SNAPSHOT_MAGIC:
        raise ConfigError(f"{path} is not a snapshot file")
    if version != SNAPSHOT_VERSION:
        raise ConfigError(f"unsupported snapshot version {version}")
    off = struct.calcsize("<8sIIII")
    fmt = f"<{nd}Q{nd}d{nd}dd16s"
    fields = struct.unpack_from(fmt, data, off)
    dims = tuple(int(n) for n in fields[:nd])
    box = fields[nd:2 * nd]
    origin = fields[2 * nd:3 * nd]
    time = fields[3 * nd]
    boundary = "periodic"
    meta_path = Path(str(path) + ".meta")
    if meta_path.exists():
        for line in meta_path.read_text(encoding="utf-8").splitlines():
            if line.startswith("boundary="):
                boundary = line.split("=", 1)[1]
    g = make_grid(GridSpec(dims, box, origin, boundary, budget=max(DEFAULT_BUDGET, int(np.prod(dims)))))
    raw = np.frombuffer(data, dtype="<f8", offset=off + struct.calcsize(fmt))
    values = raw.view("<c16").reshape(dims).astype(complex)
    return values, g, time, rank
