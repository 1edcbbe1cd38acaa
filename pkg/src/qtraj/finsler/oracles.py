"""Providers of the (generalized) quantum potential and its derivatives at a
space-time point.

Every oracle returns a :class:`QJet` with ``Q``, the spatial gradient, the
time derivative and the spatial Hessian.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, OutOfBoxError
from ..fields import interpolate


@dataclass(frozen=True)
class QJet:
    Q: float
    grad: np.ndarray
    dt: float
    hess: np.ndarray = None

    @property
    def p(self):
        """Derivatives along all extended coordinates ``(t, q)``."""
        return np.concatenate([[self.dt], self.grad])


class QFieldOracle:
    source = "abstract"
    ndim = None

    def __call__(self, t, q) -> QJet:
        raise NotImplementedError

    def Q(self, t, q):
        return self(t, q).Q

    def jet(self, x):
        return self(x[0], x[1:])


class AnalyticQ(QFieldOracle):
    """Oracle from callables ``Q(t, q)``, ``grad(t, q)``, ``dt(t, q)``, ``hess(t, q)``."""

    source = "analytic_test_field"

    def __init__(self, ndim, Q, grad, dt=None, hess=None, name="analytic"):
        self.ndim = ndim
        self._Q, self._grad, self._dt, self._hess = Q, grad, dt, hess
        self.name = name

    def __call__(self, t, q):
        q = np.asarray(q, float)
        dt = 0.0 if self._dt is None else float(self._dt(t, q))
        hess = None if self._hess is None else np.asarray(self._hess(t, q), float)
        return QJet(float(self._Q(t, q)), np.asarray(self._grad(t, q), float), dt, hess)


def constant_q(ndim, value):
    return AnalyticQ(ndim, lambda t, q: value, lambda t, q: np.zeros(ndim),
                     hess=lambda t, q: np.zeros((ndim, ndim)), name=f"constant({value})")


def wave_q(ndim, seed=0, n_waves=3, amplitude=0.3, offset=-1.0, curvature=0.02):
    """Smooth random field ``offset + 0.5 c|q|^2 + sum_j a_j cos(k_j.q - w_j t + phi_j)``."""
    rng = np.random.default_rng(seed)
    a = amplitude * rng.uniform(0.5, 1.0, n_waves)
    k = rng.normal(0.0, 0.5, (n_waves, ndim))
    w = rng.normal(0.0, 0.3, n_waves)
    phi = rng.uniform(0.0, 2.0 * np.pi, n_waves)

    def arg(t, q):
        return k @ q - w * t + phi

    def Q(t, q):
        return offset + 0.5 * curvature * q @ q + a @ np.cos(arg(t, q))

    def grad(t, q):
        return curvature * q - (a * np.sin(arg(t, q))) @ k

    def dt(t, q):
        return a @ (w * np.sin(arg(t, q)))

    def hess(t, q):
        return curvature * np.eye(ndim) - np.einsum("j,ja,jb->ab", a * np.cos(arg(t, q)), k, k)

    return AnalyticQ(ndim, Q, grad, dt, hess, name=f"waves(seed={seed})")


def free_gaussian_q(ndim, sigma, k0=0.0, q0=0.0):
    """Quantum potential of a freely spreading minimum-uncertainty packet
    (hbar = m = 1): ``Q = n/(4 s^2) - r^2/(8 s^4)`` with ``s^2 = sigma^2 (1 + (t/2sigma^2)^2)``
    and ``r`` measured from ``q0 + k0 t``."""
    k0 = np.broadcast_to(np.asarray(k0, float), (ndim,))
    q0 = np.broadcast_to(np.asarray(q0, float), (ndim,))

    def s2(t):
        return sigma**2 * (1.0 + (t / (2.0 * sigma**2)) ** 2)

    def ds2(t):
        return t / (2.0 * sigma**2)

    def Q(t, q):
        r = q - q0 - k0 * t
        return ndim / (4 * s2(t)) - r @ r / (8 * s2(t) ** 2)

    def grad(t, q):
        return -(q - q0 - k0 * t) / (4 * s2(t) ** 2)

    def dt(t, q):
        r = q - q0 - k0 * t
        S, dS = s2(t), ds2(t)
        return -ndim * dS / (4 * S**2) + (r @ k0) / (4 * S**2) + (r @ r) * dS / (4 * S**3)

    def hess(t, q):
        return -np.eye(ndim) / (4 * s2(t) ** 2)

    return AnalyticQ(ndim, Q, grad, dt, hess, name=f"free_gaussian(sigma={sigma})")


class GeneralizedQ(QFieldOracle):
    """``Q' = Q + V`` for a static external potential (time derivative of V is zero)."""

    def __init__(self, oracle: QFieldOracle, potential, hess_step=1e-4):
        self.oracle = oracle
        self.potential = potential
        self.ndim = oracle.ndim
        self.source = oracle.source
        self.hess_step = hess_step

    def __call__(self, t, q):
        j = self.oracle(t, q)
        q = np.asarray(q, float)
        V = float(self.potential(q)[0])
        gV = self.potential.gradient(q)[0]
        hess = j.hess
        if hess is not None:
            h = self.hess_step
            n = len(q)
            pts = np.concatenate([q + h * np.eye(n), q - h * np.eye(n)])
            g = self.potential.gradient(pts)
            hV = (g[:n] - g[n:]) / (2 * h)
            hess = hess + 0.5 * (hV + hV.T)
        return QJet(j.Q + V, j.grad + gV, j.dt, hess)


class GaugeShift(QFieldOracle):
    """``Q' - c`` for a constant ``c``.

    Adding the total derivative of ``S(x) = c t`` to the Finsler function turns
    ``Lambda`` into ``T/y0 - (Q' - c) y0``.  Extremals in (t, q) are unchanged,
    and a large enough ``c`` keeps ``Lambda > 0`` (so ``y0`` stays finite)
    where ``T < Q'``.
    """

    def __init__(self, oracle: QFieldOracle, shift):
        self.oracle = oracle
        self.shift = float(shift)
        self.ndim = oracle.ndim
        self.source = oracle.source

    def __call__(self, t, q):
        j = self.oracle(t, q)
        return QJet(j.Q - self.shift, j.grad, j.dt, j.hess)


class SnapshotOracle(QFieldOracle):
    """Q from a time-ordered window of pilot snapshots.

    Values, gradients and Hessians are interpolated multilinearly in space and
    linearly in time; the time derivative is the forward difference between
    the bracketing snapshots.  Times slightly outside the window extrapolate
    from the nearest pair.

    ``static = (V, grad V)`` on the grid folds a static potential into ``Q'``
    node by node before interpolation, so that the large, opposite ``Q`` and
    ``V`` gradients inside a barrier cancel on the grid rather than between
    an interpolated and an exact term.  Hessians remain those of ``Q`` alone.
    """

    source = "grid_snapshots"

    def __init__(self, pilots=(), max_keep=None, static=None):
        self.pilots = []
        self.max_keep = max_keep
        self._cache = None
        self.static = None
        if static is not None:
            V, gV = static
            self.static = np.concatenate([np.asarray(V, float)[None], np.asarray(gV, float)])
        for p in pilots:
            self.push(p)

    @property
    def ndim(self):
        return self.pilots[0].grid.ndim

    @property
    def grid(self):
        return self.pilots[0].grid

    def push(self, pilot):
        if pilot.Q is None or pilot.gradQ is None:
            raise ConfigError("snapshot oracle needs pilots derived with Q")
        if self.pilots and not pilot.time > self.pilots[-1].time:
            raise ConfigError("snapshots must be pushed in increasing time")
        self.pilots.append(pilot)
        if self.max_keep is not None and len(self.pilots) > self.max_keep:
            del self.pilots[: len(self.pilots) - self.max_keep]

    @property
    def t_range(self):
        return self.pilots[0].time, self.pilots[-1].time

    def _pair(self, t):
        if len(self.pilots) < 2:
            raise ConfigError("snapshot oracle needs at least two snapshots")
        times = [p.time for p in self.pilots]
        i = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
        return self.pilots[i], self.pilots[i + 1]

    def _stack(self, a, b, has_h):
        # the stacked pair is built once per bracketing pair, not per query
        if self._cache is None or self._cache[0] is not a or self._cache[1] is not b:
            n = a.grid.ndim
            parts = [a.Q[None], a.gradQ, b.Q[None], b.gradQ]
            if self.static is not None:
                parts[:2] = [a.Q[None] + self.static[:1], a.gradQ + self.static[1:]]
                parts[2:] = [b.Q[None] + self.static[:1], b.gradQ + self.static[1:]]
            if has_h:
                parts += [a.hessQ.reshape((n * n,) + a.Q.shape), b.hessQ.reshape((n * n,) + b.Q.shape)]
            self._cache = (a, b, np.concatenate(parts))
        return self._cache[2]

    def __call__(self, t, q):
        a, b = self._pair(t)
        q = np.atleast_2d(np.asarray(q, float))
        g = a.grid
        if not g.periodic and not g.interior(q).all():
            raise OutOfBoxError("geodesic left the unmasked interior")
        dt = b.time - a.time
        th = (t - a.time) / dt
        has_h = a.hessQ is not None and b.hessQ is not None
        n = g.ndim
        vals = interpolate(self._stack(a, b, has_h), g, q)[:, 0]
        Qa, ga = vals[0], vals[1:1 + n]
        Qb, gb = vals[1 + n], vals[2 + n:2 + 2 * n]
        hess = None
        if has_h:
            ha = vals[2 + 2 * n:2 + 2 * n + n * n].reshape(n, n)
            hb = vals[2 + 2 * n + n * n:].reshape(n, n)
            hess = (1 - th) * ha + th * hb
        return QJet((1 - th) * Qa + th * Qb, (1 - th) * ga + th * gb, (Qb - Qa) / dt, hess)
