"""Scenario orchestration, detector analysis and the command-line interface."""

from .compare import EquivalenceReport, compare_pictures, deviation_curve
from .config import ScenarioConfig, load_config
from .detector import (DetectorRecord, FluxAccumulator, FringeReport, accumulate_detector, fringe_analysis,
                       make_record, peak_masses, predicted_band, record_crossings)
from .scenario import RunArtifacts, list_presets, preset_path, run_scenario

__all__ = [
    "DetectorRecord", "EquivalenceReport", "FluxAccumulator", "FringeReport", "RunArtifacts", "ScenarioConfig",
    "accumulate_detector", "compare_pictures", "deviation_curve", "fringe_analysis", "list_presets",
    "load_config", "make_record", "peak_masses", "predicted_band", "preset_path", "record_crossings",
    "run_scenario",
]
