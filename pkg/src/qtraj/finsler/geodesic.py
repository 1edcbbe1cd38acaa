"""Geodesics of the extended Finsler function.

The second-order system in the curve parameter tau is

    x' = y,    y'^a = -Gamma^a_cd y^c y^d + f^a     (gamma_form)
               y'^a = -N^a_b y^b + f^a              (n_form)

with the optional force ``f^a = -g^ab dV/dx^b`` (``dV/dt = 0``).  Folding the
potential into ``Q'`` instead (``potential_mode='folded'``) makes the
geodesics coincide with Newtonian motion under ``Q + V`` in the time
coordinate.
"""

from __future__ import annotations

import numpy as np

from ..errors import ConfigError, DegenerateMetricError, OutOfBoxError
from ..pilot import TrajectoryBundle
from .geometry import christoffel, lambda_fn, metric, nonlinear_connection, spray
from .oracles import GeneralizedQ
from .state import V_MIN, ExtendedState

FORMS = ("gamma_form", "n_form")
POTENTIAL_MODES = ("folded", "force")
MAX_HALVINGS = 10


def _accel(x, y, oracle, potential, form, masses, v_min):
    if not y[0] > 0:
        raise DegenerateMetricError("y0 turned non-positive")
    if not np.linalg.norm(y[1:]) > v_min:
        raise DegenerateMetricError("speed below v_min")
    me = metric((x, y), oracle, masses)
    if form == "gamma_form":
        acc = -np.einsum("acd,c,d->a", christoffel((x, y), oracle, masses, me), y, y)
    elif form == "gamma_spray":
        acc = -2.0 * spray((x, y), oracle, masses, me)
    else:
        acc = -nonlinear_connection((x, y), oracle, masses, "cartan", me) @ y
    if potential is not None:
        dV = np.concatenate([[0.0], potential.gradient(x[1:])[0]])
        acc = acc - me.g_inv @ dV
    return acc


def _resolve(oracle, potential, potential_mode):
    if potential_mode not in POTENTIAL_MODES:
        raise ConfigError(f"potential_mode must be one of {POTENTIAL_MODES}")
    if potential is None:
        return oracle, None
    if potential_mode == "folded":
        return GeneralizedQ(oracle, potential), None
    return oracle, potential


def _rk4(x, y, dtau, f):
    k1x, k1y = y, f(x, y)
    k2x, k2y = y + 0.5 * dtau * k1y, f(x + 0.5 * dtau * k1x, y + 0.5 * dtau * k1y)
    k3x, k3y = y + 0.5 * dtau * k2y, f(x + 0.5 * dtau * k2x, y + 0.5 * dtau * k2y)
    k4x, k4y = y + dtau * k3y, f(x + dtau * k3x, y + dtau * k3y)
    x1 = x + dtau / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
    y1 = y + dtau / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
    return x1, y1


def geodesic_step(state: ExtendedState, oracle, potential=None, dtau=0.1, form="gamma_form",
                  masses=None, potential_mode="folded", v_min=V_MIN, _resolved=False):
    """One RK4 step in tau.  Returns ``(new_state, ds)`` with ``ds = Lambda dtau``.

    If the metric degenerates inside the step, the step is retried with half
    the parameter increment (as sub-steps covering the same ``dtau``) up to
    ten times before :class:`DegenerateMetricError` propagates.
    """
    if form not in FORMS + ("gamma_spray",):
        raise ConfigError(f"form must be one of {FORMS}")
    if not _resolved:
        oracle, potential = _resolve(oracle, potential, potential_mode)

    def f(x, y):
        return _accel(x, y, oracle, potential, form, masses, v_min)

    x, y = state.x, state.y
    for halving in range(MAX_HALVINGS + 1):
        n_sub = 2**halving
        h = dtau / n_sub
        try:
            xs, ys, ds = x, y, 0.0
            for _ in range(n_sub):
                ds += lambda_fn((xs, ys), oracle, masses) * h
                xs, ys = _rk4(xs, ys, h, f)
                if not np.all(np.isfinite(ys)) or not ys[0] > 0:
                    raise DegenerateMetricError("non-finite or time-reversing step")
            return ExtendedState(xs, ys), float(ds)
        except DegenerateMetricError:
            if halving == MAX_HALVINGS:
                raise
    raise AssertionError("unreachable")


class GeodesicIntegrator:
    """Streaming geodesic integration; :meth:`advance_to` steps until the time
    coordinate reaches a target, so that one geodesic can follow a window of
    field snapshots as they are produced."""

    def __init__(self, initial: ExtendedState, oracle, potential=None, form="gamma_form", masses=None,
                 potential_mode="folded", v_min=V_MIN, ids=(0,), provenance=None):
        self.oracle, self.potential = _resolve(oracle, potential, potential_mode)
        self.form, self.masses, self.v_min = form, masses, v_min
        self.state = initial
        self.s = 0.0
        self.tau = 0.0
        self.terminated = False
        self.reason = ""
        self.bundle = TrajectoryBundle(initial.q[None, :], initial.t, "geodesic", np.asarray(ids),
                                       provenance, (initial.qdot / initial.y0)[None, :])
        self.Lambda0 = lambda_fn((initial.x, initial.y), self.oracle, masses)

    def step(self, dtau):
        if self.terminated:
            return self.state
        try:
            if not self.state.speed > self.v_min:
                raise DegenerateMetricError("speed below v_min")
            new, ds = geodesic_step(self.state, self.oracle, self.potential, dtau, self.form,
                                    self.masses, v_min=self.v_min, _resolved=True)
            L = lambda_fn((new.x, new.y), self.oracle, self.masses)
        except (DegenerateMetricError, OutOfBoxError) as exc:
            self.terminated = True
            self.reason = str(exc)
            self.bundle.terminated[:] = True
            return self.state
        self.state = new
        self.s += ds
        self.tau += dtau
        self.bundle.append(new.t, new.q[None, :], (new.qdot / new.y0)[None, :],
                           y0=[new.y0], Lambda=[L], s=[self.s])
        return new

    def advance_to(self, t_target, dt):
        """Step with ``dtau = dt / y0`` (about one field step each) while ``t < t_target``."""
        while not self.terminated and self.state.t < t_target - 1e-12 * max(1.0, abs(t_target)):
            remaining = t_target - self.state.t
            self.step(min(dt, remaining) / self.state.y0)
        return self.state


def run_geodesic(initial: ExtendedState, oracle, potential=None, dtau=0.1, n=100, form="gamma_form",
                 masses=None, potential_mode="folded", v_min=V_MIN, provenance=None) -> TrajectoryBundle:
    """``n`` RK4 steps from ``initial``; the bundle has kind ``geodesic`` and extra
    columns ``y0``, ``Lambda`` and the accumulated arclength ``s``."""
    if int(n) < 1:
        raise ConfigError("need at least one step")
    integ = GeodesicIntegrator(initial, oracle, potential, form, masses, potential_mode, v_min,
                               provenance=provenance)
    for _ in range(int(n)):
        integ.step(dtau)
        if integ.terminated:
            break
    integ.bundle.provenance.setdefault("form", form)
    integ.bundle.provenance.setdefault("potential_mode", potential_mode)
    if integ.terminated:
        integ.bundle.provenance["terminated"] = integ.reason
    return integ.bundle


def path_at_times(bundle: TrajectoryBundle, times):
    """Geodesic positions at the given coordinate times by cubic Hermite
    interpolation in ``t`` (using the stored velocities ``dq/dt``)."""
    t, q, v = bundle.as_arrays()
    q, v = q[:, 0], v[:, 0]
    times = np.asarray(times, float)
    if len(t) < 2:
        out = np.full((len(times), q.shape[1]), np.nan)
        out[times == t[0]] = q[0]
        return out
    i = np.clip(np.searchsorted(t, times, side="right") - 1, 0, len(t) - 2)
    h = t[i + 1] - t[i]
    s = ((times - t[i]) / h)[:, None]
    h = h[:, None]
    h00 = 2 * s**3 - 3 * s**2 + 1
    h10 = s**3 - 2 * s**2 + s
    h01 = -2 * s**3 + 3 * s**2
    h11 = s**3 - s**2
    out = h00 * q[i] + h10 * h * v[i] + h01 * q[i + 1] + h11 * h * v[i + 1]
    out[(times < t[0]) | (times > t[-1])] = np.nan
    return out
