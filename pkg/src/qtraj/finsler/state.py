from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DegenerateMetricError

V_MIN = 1e-3


@dataclass(frozen=True, eq=False)
class ExtendedState:
    """Point of the tangent bundle: ``x = (t, q)``, ``y = (dt/dtau, dq/dtau)``."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.array(self.x, dtype=float).ravel()
        y = np.array(self.y, dtype=float).ravel()
        if x.shape != y.shape or len(x) < 2:
            raise ConfigError("x and y need matching length n+1 >= 2")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(y)):
            raise ConfigError("non-finite extended state")
        if not y[0] > 0:
            raise ConfigError(f"y0 = dt/dtau must be positive, got {y[0]}")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @classmethod
    def from_parts(cls, t, q, qdot, y0=1.0):
        return cls(np.concatenate([[t], np.atleast_1d(q)]), np.concatenate([[y0], np.atleast_1d(qdot)]))

    @property
    def n(self):
        return len(self.x) - 1

    @property
    def t(self):
        return self.x[0]

    @property
    def q(self):
        return self.x[1:]

    @property
    def y0(self):
        return self.y[0]

    @property
    def qdot(self):
        return self.y[1:]

    @property
    def speed(self):
        return float(np.linalg.norm(self.y[1:]))

    def check_speed(self, v_min=V_MIN):
        if not self.speed > v_min:
            raise DegenerateMetricError(f"|qdot| = {self.speed:.3g} is below v_min = {v_min:g}")
        return self

    def scaled(self, k):
        return ExtendedState(self.x, k * self.y)
