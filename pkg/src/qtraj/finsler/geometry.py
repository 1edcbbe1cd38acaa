"""Finsler function, metric, Cartan tensor, connections and curvatures.

With ``u = y0``, ``w = qdot``, ``T = sum m w^2 / 2`` and ``P = Q'(x)`` the
Finsler function is ``L = T/u - P u``.  The metric ``g = (1/2) d2(L^2)/dy dy``
has the closed form

    g00 = 3 T^2/u^4 + P^2
    g0i = -2 T m_i w_i / u^3
    gij = (m_i w_i m_j w_j + T m_i d_ij) / u^2 - P m_i d_ij

and depends on ``x`` only through ``P``, so ``dg_ab/dx^c = D_ab p_c`` with
``D = diag(2P, -m)`` and ``p = dP/dx``.  Everything below follows from these
two facts; derivatives of connections (needed only for curvature) are taken
by fourth-order central differences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DegenerateMetricError
from .state import ExtendedState

DEGENERACY_TOL = 1e-12
FD_STEP = 1e-3


def _masses(masses, n):
    m = np.ones(n) if masses is None else np.broadcast_to(np.asarray(masses, float), (n,)).copy()
    if np.any(m <= 0):
        raise ConfigError("masses must be positive")
    return m


def _split(state):
    if isinstance(state, ExtendedState):
        return state.x, state.y
    x, y = state
    return np.asarray(x, float), np.asarray(y, float)


def lambda_fn(state, oracle, masses=None):
    """``T(qdot)/y0 - Q'(x) y0``."""
    x, y = _split(state)
    if not y[0] > 0:
        raise ConfigError("y0 must be positive")
    m = _masses(masses, len(y) - 1)
    T = 0.5 * np.sum(m * y[1:] ** 2)
    return float(T / y[0] - oracle.jet(x).Q * y[0])


def metric_from_parts(u, w, m, P):
    T = 0.5 * np.sum(m * w * w)
    mw = m * w
    n = len(w)
    g = np.empty((n + 1, n + 1))
    g[0, 0] = 3.0 * T * T / u**4 + P * P
    g[0, 1:] = g[1:, 0] = -2.0 * T * mw / u**3
    g[1:, 1:] = np.outer(mw, mw) / u**2 + np.diag(m * (T / u**2 - P))
    return g


def cartan_from_parts(u, w, m):
    """``C_abc = (1/4) d3(L^2)/dy^a dy^b dy^c``; independent of ``P``."""
    T = 0.5 * np.sum(m * w * w)
    mw = m * w
    n = len(w)
    E = np.zeros((n + 1,) * 3)
    E[0, 0, 0] = -12.0 * T * T / u**5
    v = 6.0 * T * mw / u**4
    E[0, 0, 1:] = E[0, 1:, 0] = E[1:, 0, 0] = v
    B = -2.0 * (np.outer(mw, mw) + T * np.diag(m)) / u**3
    E[0, 1:, 1:] = E[1:, 0, 1:] = E[1:, 1:, 0] = B
    dm = np.diag(m)
    E[1:, 1:, 1:] = (np.einsum("ij,k->ijk", dm, mw) + np.einsum("ik,j->ijk", dm, mw)
                     + np.einsum("jk,i->ijk", dm, mw)) / u**2
    return 0.5 * E


@dataclass(frozen=True, eq=False)
class MetricEval:
    g: np.ndarray
    g_inv: np.ndarray
    dg_dx: np.ndarray
    dg_dy: np.ndarray
    Lambda: float
    degenerate: bool = False

    @property
    def det(self):
        return float(np.linalg.det(self.g))


def _scale(g):
    return float(np.max(np.abs(g))) ** len(g)


def metric(state, oracle, masses=None, check=True) -> MetricEval:
    """Closed-form metric with its x- and y-derivatives (``dg_dx[c]`` is
    ``d g / d x^c``, ``dg_dy[c] = 2 C[..., c]``)."""
    x, y = _split(state)
    if not y[0] > 0:
        raise ConfigError("y0 must be positive")
    n = len(y) - 1
    m = _masses(masses, n)
    jet = oracle.jet(x)
    P = jet.Q
    u, w = y[0], y[1:]
    g = metric_from_parts(u, w, m, P)
    det = np.linalg.det(g)
    degenerate = abs(det) < DEGENERACY_TOL * _scale(g)
    if degenerate and check:
        raise DegenerateMetricError(f"metric determinant {det:.3e} is degenerate at x={x}, y={y}")
    g_inv = np.linalg.inv(g) if not degenerate else np.full_like(g, np.nan)
    D = np.diag(np.concatenate([[2.0 * P], -m]))
    dg_dx = np.einsum("c,ab->cab", jet.p, D)
    C = cartan_from_parts(u, w, m)
    T = 0.5 * np.sum(m * w * w)
    return MetricEval(g, g_inv, dg_dx, 2.0 * np.moveaxis(C, 2, 0), float(T / u - P * u), bool(degenerate))


def cartan_tensor(state, oracle=None, masses=None):
    x, y = _split(state)
    return cartan_from_parts(y[0], y[1:], _masses(masses, len(y) - 1))


# ------------------------------------------------------------------ connections

@dataclass(frozen=True, eq=False)
class Connections:
    gamma: np.ndarray         # Gamma^a_bc, formal Christoffel symbols of g(x, y)
    N: np.ndarray             # N^a_b from Gamma y - C Gamma y y
    N_spray: np.ndarray       # N^a_b as the y-derivative of the spray
    gamma_tilde: np.ndarray   # Gamma~^c_ab, stored as [c, a, b]
    C_mixed: np.ndarray       # C^a_bc = g^ad C_dbc
    metric: MetricEval


def _parts(x, y, oracle, masses):
    n = len(y) - 1
    m = _masses(masses, n)
    jet = oracle.jet(x)
    P, p = jet.Q, jet.p
    Dd = np.concatenate([[2.0 * P], -m])
    return m, P, p, Dd


def christoffel(state, oracle, masses=None, me: MetricEval = None):
    """``Gamma^a_cd = (1/2) g^ae (d_c g_ed + d_d g_ec - d_e g_cd)`` (x-derivatives at fixed y)."""
    x, y = _split(state)
    me = me or metric((x, y), oracle, masses)
    m, P, p, Dd = _parts(x, y, oracle, masses)
    D = np.diag(Dd)
    low = 0.5 * (np.einsum("ed,c->ecd", D, p) + np.einsum("ec,d->ecd", D, p) - np.einsum("cd,e->ecd", D, p))
    return np.einsum("ae,ecd->acd", me.g_inv, low)


def spray(state, oracle, masses=None, me: MetricEval = None):
    """``G^a = (1/2) Gamma^a_cd y^c y^d``."""
    x, y = _split(state)
    me = me or metric((x, y), oracle, masses)
    m, P, p, Dd = _parts(x, y, oracle, masses)
    H = Dd * y * (p @ y) - 0.5 * p * (Dd @ (y * y))
    return 0.5 * me.g_inv @ H


def nonlinear_connection(state, oracle, masses=None, formula="cartan", me: MetricEval = None):
    """``N^a_b`` by ``Gamma y - C Gamma y y`` (``formula='cartan'``) or as the
    analytic y-derivative of the spray (``formula='spray'``)."""
    x, y = _split(state)
    me = me or metric((x, y), oracle, masses)
    if formula == "cartan":
        gam = christoffel((x, y), oracle, masses, me)
        C = cartan_from_parts(y[0], y[1:], _masses(masses, len(y) - 1))
        Cm = np.einsum("ad,dbc->abc", me.g_inv, C)
        return gam @ y - np.einsum("abc,c->ab", Cm, np.einsum("cpq,p,q->c", gam, y, y))
    if formula == "spray":
        m, P, p, Dd = _parts(x, y, oracle, masses)
        py = p @ y
        H = Dd * y * py - 0.5 * p * (Dd @ (y * y))
        dH = np.diag(Dd) * py + np.outer(Dd * y, p) - np.outer(p, Dd * y)
        C = cartan_from_parts(y[0], y[1:], _masses(masses, len(y) - 1))
        dginv = -2.0 * np.einsum("af,fhb,he->aeb", me.g_inv, C, me.g_inv)
        return 0.5 * np.einsum("aeb,e->ab", dginv, H) + 0.5 * me.g_inv @ dH
    raise ConfigError(f"unknown formula {formula!r}")


def connections(state, oracle, masses=None) -> Connections:
    x, y = _split(state)
    me = metric((x, y), oracle, masses)
    m, P, p, Dd = _parts(x, y, oracle, masses)
    gam = christoffel((x, y), oracle, masses, me)
    C = cartan_from_parts(y[0], y[1:], m)
    Cm = np.einsum("ad,dbc->abc", me.g_inv, C)
    N = gam @ y - np.einsum("abc,c->ab", Cm, np.einsum("cpq,p,q->c", gam, y, y))
    N2 = nonlinear_connection((x, y), oracle, masses, "spray", me)
    # horizontal derivatives of the metric: delta_a g_bq = D_bq p_a - N^d_a 2 C_bqd
    dg = np.einsum("bq,a->abq", np.diag(Dd), p) - 2.0 * np.einsum("da,bqd->abq", N, C)
    low = 0.5 * (dg + np.transpose(dg, (1, 0, 2)) - np.transpose(dg, (1, 2, 0)))
    gt = np.einsum("cq,abq->cab", me.g_inv, low)
    return Connections(gam, N, N2, gt, Cm, me)


# -------------------------------------------------------------------- curvature

def _fd(f, z, axis, h):
    e = np.zeros_like(z)
    e[axis] = h
    return (-f(z + 2 * e) + 8 * f(z + e) - 8 * f(z - e) + f(z - 2 * e)) / (12.0 * h)


@dataclass(frozen=True, eq=False)
class Curvatures:
    R: np.ndarray        # R^a_bc, nonlinear curvature, [a, b, c]
    lR: np.ndarray       # linear horizontal curvature R^q_cab, [q, c, a, b]
    ricci: np.ndarray
    scalar: float


def _delta(f, x, y, N, h_x, h_y):
    """``delta_c f = d_c f - N^d_c dbar_d f`` for every c; result has c last."""
    n1 = len(x)
    dx = np.stack([_fd(lambda xx: f(xx, y), x, c, h_x) for c in range(n1)], axis=-1)
    dy = np.stack([_fd(lambda yy: f(x, yy), y, d, h_y) for d in range(n1)], axis=-1)
    return dx - np.einsum("...d,dc->...c", dy, N)


def curvatures(state, oracle, masses=None, h_x=FD_STEP, h_y=FD_STEP) -> Curvatures:
    """Nonlinear curvature ``R^a_bc = delta_c N^a_b - delta_b N^a_c``, the
    horizontal curvature of the linear connection, its Ricci tensor
    ``R_ab = lR^c_abc`` and scalar ``g^ab R_ab``."""
    x, y = _split(state)
    con = connections((x, y), oracle, masses)
    N, gt, Cm = con.N, con.gamma_tilde, con.C_mixed

    def N_at(xx, yy):
        return nonlinear_connection((xx, yy), oracle, masses, "cartan")

    def gt_at(xx, yy):
        return connections((xx, yy), oracle, masses).gamma_tilde

    dN = _delta(N_at, x, y, N, h_x, h_y)           # [a, b, c] = delta_c N^a_b
    R = dN - np.transpose(dN, (0, 2, 1))
    dG = _delta(gt_at, x, y, N, h_x, h_y)          # [q, c, b, a] = delta_a Gt^q_cb
    lR = (np.transpose(dG, (0, 1, 3, 2)) - dG
          + np.einsum("qma,mcb->qcab", gt, gt) - np.einsum("qmb,mca->qcab", gt, gt)
          - np.einsum("qcm,mab->qcab", Cm, R))
    ricci = np.einsum("cabc->ab", lR)
    scalar = float(np.einsum("ab,ab->", con.metric.g_inv, ricci))
    return Curvatures(R, lR, ricci, scalar)


# --------------------------------------------------------------- admissibility

@dataclass(frozen=True)
class AdmissibilityReport:
    homogeneity_residual: float
    Lambda: float
    positive: bool
    bordered_det: float
    bordered_negative: bool
    printed_det: float
    sufficient_inequality: bool
    energy: float
    energy_condition: bool
    metric_positive_definite: bool

    def lines(self):
        yes = {True: "pass", False: "fail"}
        return [
            f"(i) homogeneity residual      {self.homogeneity_residual:.3e}",
            f"(ii) Lambda = {self.Lambda:.6g}  {'> 0' if self.positive else '<= 0'}"
            " (a gauge term dS/dx^i y^i can restore positivity without changing extremals)",
            f"(iii) bordered determinant    {self.bordered_det:.6g}  {yes[self.bordered_negative]}",
            f"     printed-matrix determinant {self.printed_det:.6g}",
            f"     sufficient inequality    {yes[self.sufficient_inequality]}",
            f"     energy T + Q' = {self.energy:.6g}  {yes[self.energy_condition]}",
            f"     metric positive definite {self.metric_positive_definite}",
        ]


def bordered_hessian(u, w, m, P):
    """``[[d_ij L, d_i L], [d_i L, 0]]`` over ``(y0, qdot)`` for one axis."""
    T = 0.5 * m * w * w
    H = np.array([[2.0 * T / u**3, -m * w / u**2], [-m * w / u**2, m / u]])
    d = np.array([-T / u**2 - P, m * w / u])
    B = np.zeros((3, 3))
    B[:2, :2] = H
    B[:2, 2] = B[2, :2] = d
    return B


def printed_bordered_matrix(u, w, m, P):
    """The bordered matrix with ``T/u^3`` in the corner, the form from which the
    sufficient inequality ``Q' < m w^2 (1 - sqrt 2) / (2 u^2)`` follows."""
    B = bordered_hessian(u, w, m, P)
    B[0, 0] = 0.5 * m * w * w / u**3
    return B


def check_admissibility(state, oracle, masses=None, k=2.5, axis=0) -> AdmissibilityReport:
    """Diagnostic report on the three conditions for a variational Finsler function.

    The bordered-determinant test is one-dimensional; in several dimensions it
    is applied to the velocity component along ``axis``.
    """
    x, y = _split(state)
    n = len(y) - 1
    m = _masses(masses, n)
    L = lambda_fn((x, y), oracle, m)
    resid = abs(lambda_fn((x, k * y), oracle, m) - k * L)
    P = oracle.jet(x).Q
    u, w, mi = y[0], y[1 + axis], m[axis]
    det = float(np.linalg.det(bordered_hessian(u, w, mi, P)))
    printed = float(np.linalg.det(printed_bordered_matrix(u, w, mi, P)))
    T = 0.5 * np.sum(m * y[1:] ** 2)
    suff = bool(P < mi * w * w * (1.0 - np.sqrt(2.0)) / (2.0 * u * u))
    g = metric_from_parts(u, y[1:], m, P)
    pd = bool(np.all(np.linalg.eigvalsh(g) > 0))
    return AdmissibilityReport(float(resid), L, bool(L > 0), det, bool(det < 0), printed, suff,
                               float(T + P), bool(T + P < 0), pd)


def metric_finite_difference(state, oracle, masses=None, h=1e-3):
    """``(1/2) d2(L^2)/dy dy`` by fourth-order central differences of :func:`lambda_fn`."""
    x, y = _split(state)
    n1 = len(y)
    st = np.array([-2, -1, 1, 2])
    wt = np.array([1.0, -8.0, 8.0, -1.0]) / 12.0
    g = np.empty((n1, n1))
    for a in range(n1):
        for b in range(a, n1):
            acc = 0.0
            for sa, wa in zip(st, wt):
                for sb, wb in zip(st, wt):
                    yy = y.copy()
                    yy[a] += sa * h
                    yy[b] += sb * h
                    acc += wa * wb * lambda_fn((x, yy), oracle, masses) ** 2
            g[a, b] = g[b, a] = 0.5 * acc / (h * h)
    return g
