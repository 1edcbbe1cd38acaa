"""Exchange-symmetric two-electron spatial wavefunctions built from two
independently propagated one-electron orbitals.

    psi(q1, q2) = c [a(q1) b(q2) + a(q2) b(q1)],   c = 1 / (2 sqrt(1 + |S|^2))

with S = <a|b>.  For normalized orbitals this prefactor gives
||psi||^2 = (1 + |S|^2) / (2 (1 + |S|^2)) = 1/2, so the measured norm is
recorded and the field is renormalized (the normalizing prefactor is
1 / sqrt(2 (1 + |S|^2))).  The spin singlet factor is carried as a tag only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fields
from .errors import ConfigError, GridBudgetError
from .fields import Grid, WaveField, interpolate
from .pilot import pointwise_pilot, spectral_jet
from .propagator import Propagator, PropagatorConfig

SPIN = "singlet"
APPROXIMATION = "independent-particle (no Hartree/xc)"
MAX_PARTICLE_DIMS = 2


def _same_grid(a: Grid, b: Grid):
    return (a.spec.dims == b.spec.dims and np.allclose(a.box, b.box) and np.allclose(a.origin, b.origin)
            and a.spec.boundary == b.spec.boundary)


def overlap(phi_a: WaveField, phi_b: WaveField) -> complex:
    """``<a|b>`` by grid quadrature."""
    if not _same_grid(phi_a.grid, phi_b.grid):
        raise ConfigError("overlap needs both orbitals on the same grid")
    return complex(np.vdot(phi_a.values, phi_b.values) * phi_a.grid.dV)


@dataclass(frozen=True, eq=False)
class TwoBodyField:
    """Symmetrized two-particle field; values on the product grid are built on demand."""

    grid: Grid
    phi_a: WaveField = field(repr=False)
    phi_b: WaveField = field(repr=False)
    S: complex
    prefactor: float
    literal_prefactor: float
    literal_norm: float
    time: float
    spin: str = SPIN
    budget: int = fields.DEFAULT_BUDGET

    @property
    def shape(self):
        return tuple(self.grid.shape) * 2

    @property
    def ndim(self):
        return 2 * self.grid.ndim

    @property
    def values(self):
        n = int(np.prod(self.shape, dtype=np.int64))
        if n > self.budget:
            raise GridBudgetError(f"product grid of {n} points exceeds the budget of {self.budget}")
        a, b = self.phi_a.values, self.phi_b.values
        return self.prefactor * (np.multiply.outer(a, b) + np.multiply.outer(b, a))

    def swapped_values(self):
        nd = self.grid.ndim
        v = self.values
        return np.transpose(v, tuple(range(nd, 2 * nd)) + tuple(range(nd)))

    def norm_on_grid(self):
        return float(np.sqrt(np.sum(np.abs(self.values) ** 2) * self.grid.dV**2))

    def norm(self):
        """Norm from orbital inner products (no product-grid materialization)."""
        na2 = np.vdot(self.phi_a.values, self.phi_a.values).real * self.grid.dV
        nb2 = np.vdot(self.phi_b.values, self.phi_b.values).real * self.grid.dV
        return float(self.prefactor * np.sqrt(2.0 * na2 * nb2 + 2.0 * abs(self.S) ** 2))

    def amplitude(self, q1, q2):
        """psi at points (``q1``, ``q2`` of shape (M, d)) by multilinear interpolation of the orbitals."""
        g = self.grid
        a1, b1 = interpolate(np.stack([self.phi_a.values, self.phi_b.values]), g, q1)
        a2, b2 = interpolate(np.stack([self.phi_a.values, self.phi_b.values]), g, q2)
        return self.prefactor * (a1 * b2 + a2 * b1)


def symmetrize(phi_G: WaveField, phi_1s: WaveField, budget=fields.DEFAULT_BUDGET) -> TwoBodyField:
    """Singlet spatial part from two orbitals on the same per-particle grid.

    The prefactor ``1/(2 sqrt(1 + |S|^2))`` is applied, the resulting norm is
    measured and stored as ``literal_norm``, and the field is renormalized.
    """
    g = phi_G.grid
    if not _same_grid(g, phi_1s.grid):
        raise ConfigError("orbitals must share one per-particle grid")
    if g.ndim > MAX_PARTICLE_DIMS:
        raise ConfigError(f"per-particle dimension is capped at {MAX_PARTICLE_DIMS}")
    n = int(np.prod(g.shape, dtype=np.int64)) ** 2
    if n > budget:
        raise GridBudgetError(f"product grid of {n} points exceeds the budget of {budget}")
    S = overlap(phi_G, phi_1s)
    c_lit = 1.0 / (2.0 * np.sqrt(1.0 + abs(S) ** 2))
    tmp = TwoBodyField(g, phi_G, phi_1s, S, c_lit, c_lit, 0.0, phi_G.time, budget=budget)
    lit_norm = tmp.norm()
    return TwoBodyField(g, phi_G, phi_1s, S, c_lit / lit_norm, c_lit, lit_norm, phi_G.time, budget=budget)


def evolve_pair(phi_G: WaveField, phi_1s: WaveField, potential, config: PropagatorConfig, n, every=1,
                observers=()):
    """Propagate both orbitals independently under ``potential`` and return the
    symmetrized field at ``t0`` and after every ``every`` steps."""
    if int(n) < 1:
        raise ConfigError("n must be at least 1")
    pa = Propagator(phi_G.grid, potential, config)
    pb = Propagator(phi_1s.grid, potential, config)
    out = [symmetrize(phi_G, phi_1s)]
    a, b = phi_G, phi_1s
    for i in range(1, int(n) + 1):
        a, b = pa.step(a), pb.step(b)
        if i % every == 0 or i == n:
            tb = symmetrize(a, b)
            for obs in observers:
                obs(tb, i)
            out.append(tb)
    return out


def conditional_slice(twobody: TwoBodyField, which, frozen_point) -> WaveField:
    """psi(., q2bar) for ``which=1`` or psi(q1bar, .) for ``which=2`` (unnormalized)."""
    if which not in (1, 2):
        raise ConfigError("which must be 1 or 2")
    g = twobody.grid
    p = np.asarray(frozen_point, float).reshape(1, g.ndim)
    fa = interpolate(twobody.phi_a.values, g, p)[0]
    fb = interpolate(twobody.phi_b.values, g, p)[0]
    a, b = twobody.phi_a.values, twobody.phi_b.values
    c = twobody.prefactor
    if which == 1:
        vals = c * (a * fb + fa * b)
    else:
        vals = c * (fa * b + a * fb)
    return WaveField(g, vals, twobody.time)


def _orbital_jets(values, grid, points):
    jet = spectral_jet(values, grid, order=3)
    n = grid.ndim
    stacked = np.concatenate([values[None], jet["grad"], jet["hess"].reshape((n * n,) + values.shape),
                              jet["grad_lap"]])
    vals = interpolate(stacked, grid, points)
    f = vals[0]
    grad = vals[1:1 + n]
    hess = vals[1 + n:1 + n + n * n].reshape((n, n) + f.shape)
    glap = vals[1 + n + n * n:]
    return f, grad, hess, glap


def pilot_at(twobody: TwoBodyField, q1, q2):
    """Velocity (4 or 2 components), Q and grad Q of the two-body field at
    configuration points, from spectral derivatives of the orbitals."""
    g = twobody.grid
    n = g.ndim
    a1, ga1, ha1, la1 = _orbital_jets(twobody.phi_a.values, g, q1)
    b1, gb1, hb1, lb1 = _orbital_jets(twobody.phi_b.values, g, q1)
    a2, ga2, ha2, la2 = _orbital_jets(twobody.phi_a.values, g, q2)
    b2, gb2, hb2, lb2 = _orbital_jets(twobody.phi_b.values, g, q2)
    c = twobody.prefactor
    psi = c * (a1 * b2 + a2 * b1)
    grad = c * np.concatenate([ga1 * b2 + gb1 * a2, a1 * gb2 + b1 * ga2])
    M = len(psi)
    hess = np.zeros((2 * n, 2 * n, M), dtype=complex)
    hess[:n, :n] = c * (ha1 * b2 + hb1 * a2)
    hess[n:, n:] = c * (a1 * hb2 + b1 * ha2)
    cross = c * (np.einsum("im,jm->ijm", ga1, gb2) + np.einsum("im,jm->ijm", gb1, ga2))
    hess[:n, n:] = cross
    hess[n:, :n] = np.swapaxes(cross, 0, 1)
    lap1a, lap1b = np.trace(ha1), np.trace(hb1)
    lap2a, lap2b = np.trace(ha2), np.trace(hb2)
    lap = c * (lap1a * b2 + lap1b * a2 + a1 * lap2b + b1 * lap2a)
    # gradient of the full Laplacian, first particle's components then the second's
    g_lap = np.concatenate([
        c * (la1 * b2 + lb1 * a2 + ga1 * lap2b + gb1 * lap2a),
        c * (lap1a * gb2 + lap1b * ga2 + a1 * lb2 + b1 * la2),
    ])
    return pointwise_pilot(psi, grad, lap, hess, g_lap)


def provenance(twobody: TwoBodyField):
    return {
        "spin": twobody.spin,
        "approximation": APPROXIMATION,
        "overlap": f"{twobody.S.real:.17g}{twobody.S.imag:+.17g}j",
        "literal_prefactor_norm": f"{twobody.literal_norm:.17g}",
    }
