"""Extended Finsler geometry of the quantum potential and its geodesics."""

from .geodesic import FORMS, GeodesicIntegrator, geodesic_step, path_at_times, run_geodesic
from .geometry import (AdmissibilityReport, Connections, Curvatures, MetricEval, cartan_tensor,
                       check_admissibility, christoffel, connections, curvatures, lambda_fn, metric,
                       metric_finite_difference, nonlinear_connection, spray)
from .oracles import (AnalyticQ, GaugeShift, GeneralizedQ, QFieldOracle, QJet, SnapshotOracle, constant_q,
                      free_gaussian_q, wave_q)
from .state import V_MIN, ExtendedState

__all__ = [
    "AdmissibilityReport", "AnalyticQ", "Connections", "Curvatures", "ExtendedState", "FORMS",
    "GaugeShift", "GeneralizedQ", "GeodesicIntegrator", "MetricEval", "QFieldOracle", "QJet", "SnapshotOracle",
    "V_MIN", "cartan_tensor", "check_admissibility", "christoffel", "connections", "constant_q",
    "curvatures", "free_gaussian_q", "geodesic_step", "lambda_fn", "metric", "metric_finite_difference",
    "nonlinear_connection", "path_at_times", "run_geodesic", "spray", "wave_q",
]
