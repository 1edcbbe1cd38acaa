"""Pilot-wave quantities and Bohmian trajectories.

For psi = A exp(iS) (hbar = m = 1) the guidance velocity is v = Im(grad psi / psi)
and the quantum potential is Q = -laplacian(A) / (2A).  Both are evaluated
from spectral derivatives of psi itself, using

    laplacian(A)/A = Re(laplacian(psi)/psi) + |v|^2,

which avoids differentiating |psi| across its kinks at nodes.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from . import fields
from .errors import ConfigError, NodeError, NonFiniteFieldError
from .fields import Grid, WaveField, interpolate

NODE_EPS = 1e-6


def _odd_k(grid: Grid, axis):
    k = grid.k[axis].copy()
    n = grid.shape[axis]
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * grid.ndim
    shape[axis] = -1
    return k.reshape(shape)


def spectral_jet(values, grid: Grid, order=3):
    """Spectral derivatives of a complex field.

    Returns a dict with ``grad`` (ndim, ...), and for ``order >= 2`` ``hess``
    (ndim, ndim, ...) and ``lap``; for ``order >= 3`` also ``grad_lap``.
    """
    nd = grid.ndim
    fk = fields.fftn(values)
    kk = [_odd_k(grid, d) for d in range(nd)]
    out = {"grad": np.stack([fields.ifftn(1j * kk[d] * fk) for d in range(nd)])}
    if order >= 2:
        hess = np.empty((nd, nd) + tuple(grid.shape), dtype=complex)
        kfull = grid.k_mesh()
        for a in range(nd):
            for b in range(a, nd):
                ka = kfull[a] if a == b else kk[a]
                kb = kfull[b] if a == b else kk[b]
                hess[a, b] = fields.ifftn(-ka * kb * fk)
                hess[b, a] = hess[a, b]
        out["hess"] = hess
        out["lap"] = np.trace(hess, axis1=0, axis2=1) if nd > 1 else hess[0, 0]
    if order >= 3:
        k2 = grid.k_squared()
        out["grad_lap"] = np.stack([fields.ifftn(-1j * kk[d] * k2 * fk) for d in range(nd)])
    return out


def pointwise_pilot(psi, grad, lap=None, hess=None, grad_lap=None):
    """Velocity, quantum potential and its gradient from local derivatives of psi.

    Works on any trailing shape; ``grad`` has the component axis first.  Where
    psi == 0 the results are inf/nan and must be masked by the caller.
    """
    with np.errstate(divide="ignore", invalid="ignore"):
        G = grad / psi
        v = G.imag
        if lap is None:
            return v, None, None
        R = lap / psi
        Q = -0.5 * (R.real + np.sum(v * v, axis=0))
        if hess is None or grad_lap is None:
            return v, Q, None
        dv = (hess / psi - G[:, None] * G[None, :]).imag
        gradQ = -0.5 * ((grad_lap / psi - R * G).real + 2.0 * np.einsum("j...,ij...->i...", v, dv))
    return v, Q, gradQ


@dataclass(frozen=True, eq=False)
class PilotField:
    grid: Grid
    time: float
    A: np.ndarray = field(repr=False)
    v: np.ndarray = field(repr=False)
    node_mask: np.ndarray = field(repr=False)
    Q: np.ndarray = field(default=None, repr=False)
    gradQ: np.ndarray = field(default=None, repr=False)
    hessQ: np.ndarray = field(default=None, repr=False)
    v_max: float = None

    def velocity_at(self, points):
        return interpolate(self.v, self.grid, points).T

    def masked_at(self, points):
        """True where the nearest grid node lies under the node mask."""
        pts = np.atleast_2d(points)
        s = np.round((pts - self.grid.origin) / self.grid.h).astype(np.int64)
        n = np.asarray(self.grid.shape)
        s = np.mod(s, n) if self.grid.periodic else np.clip(s, 0, n - 1)
        return self.node_mask[tuple(s.T)]


def _fill_nodes(arrays, mask):
    """Replace masked entries by the value at the nearest unmasked node."""
    if not mask.any():
        return arrays
    idx = ndimage.distance_transform_edt(mask, return_distances=False, return_indices=True)
    out = []
    for a in arrays:
        if a is None:
            out.append(None)
            continue
        lead = a.shape[: a.ndim - mask.ndim]
        filled = a[(Ellipsis, *idx)] if lead else a[tuple(idx)]
        out.append(filled)
    return out


def derive_pilot(field: WaveField, with_Q=True, with_hessian=False, v_max=None, node_eps=NODE_EPS) -> PilotField:
    """A, v, Q, grad Q (and optionally the Hessian of Q) on the grid.

    Nodes are points with ``A < node_eps * max(A)``; there Q and v take the value
    of the nearest unmasked node and speeds are clamped to ``v_max`` if given.
    """
    g = field.grid
    psi = field.values
    A = np.abs(psi)
    amax = float(A.max())
    if not amax > 0 or not np.isfinite(amax):
        raise NodeError("wavefield vanishes everywhere")
    mask = A < node_eps * amax
    safe = np.where(mask, 1.0, psi)
    jet = spectral_jet(psi, g, order=3 if with_Q else 1)
    v, Q, gradQ = pointwise_pilot(safe, jet["grad"], jet.get("lap"), jet.get("hess"), jet.get("grad_lap"))
    v, Q, gradQ = _fill_nodes([v, Q, gradQ], mask)
    if v_max is not None and mask.any():
        speed = np.sqrt(np.sum(v * v, axis=0))
        scale = np.where(mask & (speed > v_max), v_max / np.maximum(speed, 1e-300), 1.0)
        v = v * scale
    hessQ = None
    if with_Q and with_hessian:
        hessQ = np.stack([np.stack([fields.derivative(gradQ[a], g, b, 1, "central-4th")
                                    for b in range(g.ndim)]) for a in range(g.ndim)])
        hessQ = 0.5 * (hessQ + np.swapaxes(hessQ, 0, 1))
    for name, arr in (("v", v), ("Q", Q), ("gradQ", gradQ)):
        if arr is not None and not np.all(np.isfinite(arr)):
            raise NonFiniteFieldError(f"non-finite {name} outside the node mask at t={field.time}")
    return PilotField(g, field.time, A, v, mask, Q, gradQ, hessQ, v_max)


# ----------------------------------------------------------------- trajectories

class TrajectoryBundle:
    """Synchronously timestamped paths of several trajectories.

    ``positions`` and ``velocities`` are lists (one entry per timestamp) of
    ``(n_traj, ndim)`` arrays.  ``extra`` holds optional per-step columns
    (e.g. ``y0``, ``Lambda``, ``s`` for geodesics).
    """

    def __init__(self, positions, time=0.0, kind="bohmian", ids=None, provenance=None, velocities=None):
        q = np.atleast_2d(np.asarray(positions, float)).copy()
        self.kind = kind
        self.ids = np.arange(len(q)) if ids is None else np.asarray(ids)
        self.provenance = dict(provenance or {})
        self.times = [float(time)]
        self.positions = [q]
        self.velocities = [np.full_like(q, np.nan) if velocities is None else np.asarray(velocities, float)]
        self.terminated = np.zeros(len(q), dtype=bool)
        self.flagged = np.zeros(len(q), dtype=bool)
        self.extra = {}

    def __len__(self):
        return len(self.ids)

    @property
    def ndim(self):
        return self.positions[0].shape[1]

    @property
    def current(self):
        return self.positions[-1]

    def append(self, t, q, v, **extra):
        if not t > self.times[-1]:
            raise ValueError("timestamps must increase strictly")
        self.times.append(float(t))
        self.positions.append(np.asarray(q, float))
        self.velocities.append(np.asarray(v, float))
        for key, val in extra.items():
            self.extra.setdefault(key, []).append(np.asarray(val, float))

    def path(self, i):
        return np.array([p[i] for p in self.positions])

    def as_arrays(self):
        return np.asarray(self.times), np.stack(self.positions), np.stack(self.velocities)

    def write(self, path):
        return write_trajectories(path, self)


def write_trajectories(path, bundle: TrajectoryBundle):
    """Plain-text table: a ``#`` header with provenance, then one row per
    (id, t) with positions, velocities, status and any extra columns, all in
    ``%.17g`` so that files round-trip exactly."""
    nd = bundle.ndim
    extra = sorted(bundle.extra)
    cols = ["id", "t"] + [f"q{d}" for d in range(nd)] + [f"v{d}" for d in range(nd)] + extra
    cols += ["terminated", "flagged"]
    lines = [f"# kind={bundle.kind}"]
    lines += [f"# {k}={bundle.provenance[k]}" for k in sorted(bundle.provenance)]
    lines.append("# " + " ".join(cols))
    times = bundle.times
    for j, tid in enumerate(bundle.ids):
        for n, t in enumerate(times):
            row = [str(int(tid)), "%.17g" % t]
            row += ["%.17g" % x for x in bundle.positions[n][j]]
            row += ["%.17g" % x for x in bundle.velocities[n][j]]
            for key in extra:
                val = bundle.extra[key][n - 1][j] if n > 0 else np.nan
                row.append("%.17g" % val)
            row += [str(int(bundle.terminated[j])), str(int(bundle.flagged[j]))]
            lines.append(" ".join(row))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_trajectories(path) -> TrajectoryBundle:
    header, cols, rows = {}, None, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#"):
                body = line[1:].strip()
                if "=" in body and cols is None and not body.startswith("id "):
                    key, val = body.split("=", 1)
                    header[key] = val
                else:
                    cols = body.split()
            elif line.strip():
                rows.append(line.split())
    if cols is None:
        raise ConfigError(f"{path} has no column header")
    data = np.array(rows, dtype=float).reshape(-1, len(cols))
    nd = sum(1 for c in cols if re.fullmatch(r"q\d+", c))
    ids = np.unique(data[:, 0]).astype(int)
    per = data.reshape(len(ids), -1, len(cols))
    kind = header.pop("kind", "bohmian")
    b = TrajectoryBundle(per[:, 0, 2:2 + nd], per[0, 0, 1], kind, ids, header, per[:, 0, 2 + nd:2 + 2 * nd])
    extra = [c for c in cols[2 + 2 * nd:] if c not in ("terminated", "flagged")]
    for n in range(1, per.shape[1]):
        ex = {c: per[:, n, cols.index(c)] for c in extra}
        b.append(per[0, n, 1], per[:, n, 2:2 + nd], per[:, n, 2 + nd:2 + 2 * nd], **ex)
    b.terminated = per[:, 0, cols.index("terminated")].astype(bool)
    b.flagged = per[:, 0, cols.index("flagged")].astype(bool)
    return b


def _velocity_rk(pilot_now, pilot_next, points, theta):
    stacked = np.concatenate([pilot_now.v, pilot_next.v])
    vals = interpolate(stacked, pilot_now.grid, points)
    nd = pilot_now.grid.ndim
    v = (1.0 - theta) * vals[:nd] + theta * vals[nd:]
    return v.T


def step_bohmian(bundle: TrajectoryBundle, pilot_now: PilotField, pilot_next: PilotField, dt=None):
    """One RK4 step of dq/dt = v(q, t) between two pilot snapshots.

    Velocities are interpolated multilinearly in space and linearly in time.
    Trajectories that leave the unmasked interior are frozen and flagged
    terminated; those whose cell touches a node are flagged and speed-clamped.
    """
    g = pilot_now.grid
    if dt is None:
        dt = pilot_next.time - pilot_now.time
    if not dt > 0:
        raise ConfigError("pilot snapshots must be strictly ordered in time")
    q0 = bundle.current.copy()
    active = ~bundle.terminated
    v_max = pilot_now.v_max

    def vel(points, theta):
        v = np.zeros_like(points)
        if not active.any():
            return v
        p = points[active]
        ok = g.interior(p) if not g.periodic else np.ones(len(p), bool)
        if g.periodic:
            vv = _velocity_rk(pilot_now, pilot_next, p, theta)
        else:
            vv = np.zeros_like(p)
            inside = np.all((p >= g.origin) & (p <= g.upper), axis=1)
            vv[inside] = _velocity_rk(pilot_now, pilot_next, p[inside], theta)
            ok &= inside
        if v_max is not None:
            sp = np.linalg.norm(vv, axis=1)
            over = sp > v_max
            vv[over] *= (v_max / sp[over])[:, None]
        out_of_box[np.flatnonzero(active)[~ok]] = True
        v[active] = vv
        return v

    out_of_box = np.zeros(len(q0), dtype=bool)
    k1 = vel(q0, 0.0)
    k2 = vel(q0 + 0.5 * dt * k1, 0.5)
    k3 = vel(q0 + 0.5 * dt * k2, 0.5)
    k4 = vel(q0 + dt * k3, 1.0)
    q1 = q0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(q1[active])):
        raise NonFiniteFieldError("non-finite Bohmian velocity")
    if g.periodic:
        q1 = g.origin + np.mod(q1 - g.origin, g.box)
    newly_out = active & (out_of_box | ~g.interior(q1))
    q1[newly_out] = q0[newly_out]
    q1[bundle.terminated] = q0[bundle.terminated]
    bundle.terminated |= newly_out
    still = ~bundle.terminated
    if still.any():
        bundle.flagged[still] |= pilot_next.masked_at(q1[still]) | pilot_now.masked_at(q0[still])
    v1 = np.zeros_like(q1)
    if still.any():
        v1[still] = pilot_next.velocity_at(q1[still])
    bundle.append(pilot_now.time + dt, q1, v1)
    return bundle


def sample_initial_positions(field: WaveField, n, mode="density_sampled", seed=0, axis=1,
                             length=None, center=None):
    """Initial trajectory positions.

    ``density_sampled`` draws i.i.d. from |psi|^2 by inverse CDF over grid cells
    (uniform within the cell); ``regular_grid_line`` places ``n`` equispaced
    points on a line along ``axis`` through ``center`` (default: the density
    centroid), spanning ``length`` (default: four standard deviations).
    """
    if int(n) < 1:
        raise ConfigError("need at least one trajectory")
    n = int(n)
    g = field.grid
    rho = field.density()
    total = rho.sum()
    if not total > 0:
        raise NodeError("cannot sample from a vanishing density")
    if mode == "density_sampled":
        rng = np.random.default_rng(seed)
        cdf = np.cumsum(rho.ravel())
        cdf /= cdf[-1]
        u = rng.random(n)
        flat = np.minimum(np.searchsorted(cdf, u, side="right"), cdf.size - 1)
        idx = np.unravel_index(flat, g.shape)
        nodes = np.stack([g.axes[d][idx[d]] for d in range(g.ndim)], axis=1)
        jitter = (rng.random((n, g.ndim)) - 0.5) * g.h
        pts = nodes + jitter
        if not g.periodic:
            pts = np.clip(pts, g.origin, g.upper)
        return pts
    if mode == "regular_grid_line":
        mesh = g.mesh()
        w = rho / total
        mean = np.array([np.sum(w * x) for x in mesh])
        c = mean if center is None else np.asarray(center, float)
        if length is None:
            length = 4.0 * np.sqrt(np.sum(w * (mesh[axis] - mean[axis]) ** 2))
        pts = np.repeat(c[None, :], n, axis=0)
        if n > 1:
            pts[:, axis] = c[axis] + np.linspace(-0.5 * length, 0.5 * length, n)
        return pts
    raise ConfigError(f"unknown sampling mode {mode!r}")


def conditional_velocity(psi2, which, frozen_point):
    """Velocity field of particle ``which`` (1 or 2) with the partner frozen."""
    from .twobody import conditional_slice

    sl = conditional_slice(psi2, which, frozen_point)
    psi = sl.values
    A = np.abs(psi)
    if not A.max() > 0:
        raise NodeError("conditional slice vanishes everywhere")
    mask = A < NODE_EPS * A.max()
    if mask.all():
        raise NodeError("conditional slice lies entirely under the node threshold")
    grad = fields.gradient(psi, sl.grid)
    v, _, _ = pointwise_pilot(np.where(mask, 1.0, psi), grad)
    (v,) = _fill_nodes([v], mask)
    return v


# ------------------------------------------------------------------ statistics

def freedman_diaconis_edges(x):
    x = np.asarray(x, float)
    q75, q25 = np.percentile(x, [75, 25])
    width = 2.0 * (q75 - q25) * len(x) ** (-1.0 / 3.0)
    lo, hi = float(x.min()), float(x.max())
    if not width > 0 or hi <= lo:
        return np.array([lo - 0.5, hi + 0.5])
    nbins = max(1, int(np.ceil((hi - lo) / width)))
    return np.linspace(lo, hi, nbins + 1)


def marginal_cdf(field_or_density, grid: Grid, axis):
    """Cumulative marginal of |psi|^2 along ``axis`` as a callable, treating each
    node as carrying its cell's mass uniformly over [x - h/2, x + h/2]."""
    rho = field_or_density.density() if isinstance(field_or_density, WaveField) else field_or_density
    others = tuple(d for d in range(grid.ndim) if d != axis)
    m = rho.sum(axis=others) if others else rho
    m = m / m.sum()
    x = grid.axes[axis]
    h = grid.h[axis]
    knots = np.concatenate([[x[0] - 0.5 * h], x + 0.5 * h])
    cum = np.concatenate([[0.0], np.cumsum(m)])
    return lambda e: np.interp(e, knots, cum, left=0.0, right=1.0)


def marginal_l1(positions, field: WaveField, axis, edges=None, density=None):
    """L1 distance between the histogram of trajectory coordinates along
    ``axis`` (Freedman-Diaconis bins by default) and the |psi|^2 marginal,
    both as probabilities per bin; mass outside the bins counts fully."""
    x = np.asarray(positions, float)[:, axis]
    if edges is None:
        edges = freedman_diaconis_edges(x)
    hist, _ = np.histogram(x, edges)
    p = hist / len(x)
    cdf = marginal_cdf(field if density is None else density, field.grid, axis)
    c = cdf(edges)
    q = np.diff(c)
    return float(np.abs(p - q).sum() + c[0] + (1.0 - c[-1])), edges
