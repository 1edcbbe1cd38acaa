"""Time evolution under H = -laplacian/2 + V.

Two schemes share one interface:

* ``split_operator`` -- Strang splitting exp(-iK dt/2) exp(-iV dt) exp(-iK dt/2)
  with the kinetic factor applied in Fourier space (exactly unitary).
* ``cayley_adi`` -- the Cayley form (1 + iH dt/2) psi' = (1 - iH dt/2) psi,
  factored into one-dimensional tridiagonal solves per axis with V shared
  evenly between the axes, sequenced symmetrically for second order.

Imaginary time replaces ``i dt`` by ``dt`` and renormalizes after every step.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass

import numpy as np

from . import fields
from .errors import ConfigError, ConvergenceError, NonFiniteFieldError, ObserverError, SolverError
from .fields import WaveField
from .potentials import Free, Potential

log = logging.getLogger(__name__)

SCHEMES = ("split_operator", "cayley_adi")


class AccuracyWarning(UserWarning):
    pass


@dataclass(frozen=True)
class PropagatorConfig:
    scheme: str = "split_operator"
    dt: float = 0.1
    imaginary_time: bool = False
    solve_tol: float = 1e-10
    absorb: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ConfigError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.dt == 0 or not np.isfinite(self.dt):
            raise ConfigError("dt must be finite and nonzero")
        if self.imaginary_time and self.dt < 0:
            raise ConfigError("imaginary-time relaxation needs dt > 0")


def _potential_array(potential, grid):
    if potential is None:
        return np.zeros(grid.shape)
    if isinstance(potential, Potential):
        potential.check_dims(grid.ndim)
        return potential.on_grid(grid)
    V = np.asarray(potential, float)
    if V.shape != tuple(grid.shape):
        raise ConfigError(f"potential of shape {V.shape} does not match grid {grid.shape}")
    return V


class _Tridiagonal:
    """Batched solver for (diag_i) x_i + off (x_{i-1} + x_{i+1}) = d_i along the
    last axis, optionally cyclic.  The elimination factors are computed once."""

    def __init__(self, diag, off, cyclic):
        self.off = off
        self.cyclic = cyclic
        self.n = diag.shape[-1]
        diag = diag.astype(complex)
        if cyclic:
            gamma = -diag[..., 0]
            self.gamma = gamma
            diag = diag.copy()
            diag[..., 0] = diag[..., 0] - gamma
            diag[..., -1] = diag[..., -1] - off * off / gamma
        self.diag = diag
        n = self.n
        cp = np.empty_like(diag)
        den = np.empty_like(diag)
        den[..., 0] = diag[..., 0]
        cp[..., 0] = off / den[..., 0]
        for i in range(1, n):
            den[..., i] = diag[..., i] - off * cp[..., i - 1]
            cp[..., i] = off / den[..., i]
        self.cp, self.den = cp, den
        if cyclic:
            u = np.zeros_like(diag)
            u[..., 0] = gamma
            u[..., -1] = off
            self.z = self._thomas(u)
            self.v_last = off / gamma

    def _thomas(self, d):
        n, off, cp, den = self.n, self.off, self.cp, self.den
        y = np.empty_like(d)
        y[..., 0] = d[..., 0] / den[..., 0]
        for i in range(1, n):
            y[..., i] = (d[..., i] - off * y[..., i - 1]) / den[..., i]
        for i in range(n - 2, -1, -1):
            y[..., i] -= cp[..., i] * y[..., i + 1]
        return y

    def solve(self, d):
        y = self._thomas(d)
        if not self.cyclic:
            return y
        vy = y[..., 0] + self.v_last * y[..., -1]
        vz = self.z[..., 0] + self.v_last * self.z[..., -1]
        return y - (vy / (1.0 + vz))[..., None] * self.z


class Propagator:
    """Propagation engine for one grid, potential and config; caches the
    exponentials (split operator) or factorized tridiagonals (Cayley)."""

    def __init__(self, grid, potential=None, config: PropagatorConfig = PropagatorConfig()):
        self.grid = grid
        self.config = config
        self.potential = potential if potential is not None else Free()
        self.V = _potential_array(potential, grid)
        self.mask = grid.absorbing_mask() if (config.absorb and not grid.periodic) else None
        self._k2 = grid.k_squared()
        dt = config.dt
        ekin_max = 0.5 * float(np.sum(grid.k_max**2))
        if not config.imaginary_time and abs(dt) * ekin_max >= 0.5 and config.scheme == "split_operator":
            warnings.warn(f"dt*E_kin_max = {abs(dt) * ekin_max:.3g} >= 0.5; "
                          "high-k components leave the split-operator accuracy regime",
                          AccuracyWarning, stacklevel=2)
        if config.scheme == "split_operator":
            if config.imaginary_time:
                self._kin = np.exp(-0.25 * self._k2 * dt)
                self._pot = np.exp(-self.V * dt)
            else:
                self._kin = np.exp(-0.25j * self._k2 * dt)
                self._pot = np.exp(-1j * self.V * dt)
        else:
            self._build_cayley()

    # ---------------------------------------------------------------- cayley
    def _build_cayley(self):
        g, cfg = self.grid, self.config
        nd = g.ndim
        if nd == 1:
            sequence = [(0, cfg.dt)]
        else:
            half = 0.5 * cfg.dt
            sequence = [(a, half) for a in range(nd)] + [(a, half) for a in reversed(range(nd))]
        self._sequence = []
        cache = {}
        for axis, sub_dt in sequence:
            key = (axis, sub_dt)
            if key not in cache:
                c = (0.5 * sub_dt) if cfg.imaginary_time else (0.5j * sub_dt)
                h2 = g.h[axis] ** 2
                diag_h = 1.0 / h2 + self.V / nd
                off_h = -0.5 / h2
                Vm = np.moveaxis(diag_h, axis, -1)
                solver = _Tridiagonal(1.0 + c * Vm, c * off_h, cyclic=g.periodic)
                cache[key] = (solver, c, Vm, off_h)
            self._sequence.append((axis,) + cache[key])

    def _apply_h1d(self, psi_m, Vm, off_h):
        if self.grid.periodic:
            nb = np.roll(psi_m, 1, -1) + np.roll(psi_m, -1, -1)
        else:
            nb = np.zeros_like(psi_m)
            nb[..., 1:] += psi_m[..., :-1]
            nb[..., :-1] += psi_m[..., 1:]
        return Vm * psi_m + off_h * nb

    def _cayley_step(self, psi):
        tol = self.config.solve_tol
        for axis, solver, c, Vm, off_h in self._sequence:
            pm = np.moveaxis(psi, axis, -1)
            rhs = pm - c * self._apply_h1d(pm, Vm, off_h)
            out = solver.solve(rhs)
            resid = out + c * self._apply_h1d(out, Vm, off_h) - rhs
            scale = max(float(np.max(np.abs(rhs))), 1e-300)
            if float(np.max(np.abs(resid))) > tol * scale:
                raise SolverError(f"tridiagonal solve residual {np.max(np.abs(resid)):.3e} "
                                  f"exceeds tolerance {tol:g} on axis {axis}")
            psi = np.moveaxis(out, -1, axis)
        return psi

    # ------------------------------------------------------------------ step
    def _split_step(self, psi):
        psi = fields.ifftn(self._kin * fields.fftn(psi))
        psi = self._pot * psi
        return fields.ifftn(self._kin * fields.fftn(psi))

    def step(self, field: WaveField) -> WaveField:
        if field.grid is not self.grid and field.grid.shape != self.grid.shape:
            raise ConfigError("field grid does not match propagator grid")
        if self.config.scheme == "split_operator":
            psi = self._split_step(field.values)
        else:
            psi = self._cayley_step(field.values)
        if not np.all(np.isfinite(psi)):
            bad = np.argwhere(~np.isfinite(psi))
            raise NonFiniteFieldError(f"non-finite amplitude after step from t={field.time:.6g}; "
                                      f"{len(bad)} bad points, first at index {tuple(bad[0])}")
        if self.mask is not None:
            psi = psi * self.mask
        if self.config.imaginary_time:
            norm = np.sqrt(np.sum(np.abs(psi) ** 2) * self.grid.dV)
            return WaveField(field.grid, psi / norm, field.time)
        return WaveField(field.grid, psi, field.time + self.config.dt)

    def run(self, field: WaveField, n_steps, observers=()) -> WaveField:
        """Apply :meth:`step` ``n_steps`` times, calling each observer as
        ``observer(field, step_index)`` after every step."""
        if int(n_steps) < 1:
            raise ConfigError("n_steps must be at least 1")
        for i in range(1, int(n_steps) + 1):
            field = self.step(field)
            for obs in observers:
                try:
                    obs(field, i)
                except Exception as exc:
                    name = getattr(obs, "__name__", type(obs).__name__)
                    raise ObserverError(f"observer {name} failed at step {i} (t={field.time:.6g}): {exc}") from exc
        return field

    def energy(self, field: WaveField) -> float:
        return energy(field, self.V)


def energy(field: WaveField, potential=None) -> float:
    """<H> with the spectral kinetic operator."""
    g = field.grid
    V = _potential_array(potential, g) if not isinstance(potential, np.ndarray) else potential
    psi = field.values
    kin = fields.ifftn(0.5 * g.k_squared() * fields.fftn(psi))
    num = np.sum(np.conj(psi) * (kin + V * psi)).real
    return float(num / np.sum(np.abs(psi) ** 2).real)


def step(field, potential, config: PropagatorConfig) -> WaveField:
    return Propagator(field.grid, potential, config).step(field)


def run(field, potential, config: PropagatorConfig, n_steps, observers=()) -> WaveField:
    return Propagator(field.grid, potential, config).run(field, n_steps, observers)


def relax_ground_state(field: WaveField, potential, dt_schedule=(0.2, 0.05, 0.0125), tol=1e-8,
                       max_iter=20000, scheme="split_operator"):
    """Imaginary-time relaxation; each stage of ``dt_schedule`` runs until the
    energy changes by less than ``tol`` between consecutive steps."""
    V = _potential_array(potential, field.grid)
    E_prev = energy(field, V)
    total = 0
    for dt in dt_schedule:
        prop = Propagator(field.grid, V, PropagatorConfig(scheme=scheme, dt=dt, imaginary_time=True, absorb=False))
        for _ in range(max_iter):
            field = prop.step(field)
            total += 1
            E = energy(field, V)
            if abs(E - E_prev) < tol:
                E_prev = E
                break
            E_prev = E
        else:
            raise ConvergenceError(f"imaginary-time relaxation did not converge within {max_iter} steps at dt={dt}")
    log.debug("relaxed to E=%.12f in %d steps", E_prev, total)
    return field
