"""Cross-checks between the density, Bohmian and geodesic pictures."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError
from ..finsler.geodesic import path_at_times
from ..pilot import TrajectoryBundle, marginal_l1


@dataclass
class EquivalenceReport:
    times: np.ndarray
    deviation: np.ndarray          # (n_times, n_pairs) in grid spacings
    h: float
    labels: list
    l1: dict
    geodesic_angles: np.ndarray = None
    bohmian_angles: np.ndarray = None

    @property
    def max_deviation(self):
        d = self.deviation[np.isfinite(self.deviation)]
        return float(d.max()) if d.size else float("nan")

    def per_pair_max(self):
        d = np.where(np.isfinite(self.deviation), self.deviation, -np.inf).max(axis=0)
        return np.where(np.isfinite(d), d, np.nan)

    def lines(self, every=None):
        out = [f"Bohmian-geodesic deviation (units of h = {self.h:.6g} bohr)"]
        for lab, m in zip(self.labels, self.per_pair_max()):
            out.append(f"  {lab}: max {m:.4g} h")
        out.append(f"  overall max {self.max_deviation:.4g} h")
        n = len(self.times)
        every = every or max(1, n // 20)
        out.append("  t        " + "  ".join(f"{lab:>12s}" for lab in self.labels))
        for i in range(0, n, every):
            out.append(f"  {self.times[i]:8.3f} " + "  ".join(f"{d:12.4g}" for d in self.deviation[i]))
        for key, val in self.l1.items():
            out.append(f"equivariance L1 ({key}) = {val:.4f}")
        return out


def deviation_curve(bohmian: TrajectoryBundle, geodesics, pairs, h):
    """Distance between geodesic ``k`` and Bohmian trajectory ``pairs[k]`` at
    every Bohmian timestamp, in units of ``h``."""
    t, qb, _ = bohmian.as_arrays()
    dev = np.full((len(t), len(geodesics)), np.nan)
    for k, (g, j) in enumerate(zip(geodesics, pairs)):
        qg = path_at_times(g, t)
        dev[:, k] = np.linalg.norm(qg - qb[:, j], axis=1) / h
    return t, dev


def compare_pictures(bohmian: TrajectoryBundle, geodesics, pairs, h, field=None, axes=(0,), labels=None):
    """Per-time deviation between each geodesic and its matched Bohmian
    trajectory, and the equivariance L1 of the Bohmian ensemble against
    ``|psi|^2`` of ``field`` (if given) along ``axes``."""
    if isinstance(geodesics, TrajectoryBundle):
        geodesics = [geodesics]
    sid = bohmian.provenance.get("scenario_id")
    for g in geodesics:
        gid = g.provenance.get("scenario_id")
        if sid is not None and gid is not None and gid != sid:
            raise ConfigError(f"provenance mismatch: Bohmian {sid} vs geodesic {gid}")
    t, dev = deviation_curve(bohmian, geodesics, pairs, h)
    l1 = {}
    if field is not None:
        q = bohmian.current
        alive = ~bohmian.terminated
        for ax in axes:
            l1[f"axis {ax}"] = marginal_l1(q[alive], field, ax)[0]
    labels = labels or [f"geodesic {k} / trajectory {j}" for k, j in enumerate(pairs)]
    return EquivalenceReport(t, dev, h, labels, l1)
