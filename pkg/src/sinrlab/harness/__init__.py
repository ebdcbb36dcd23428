"""Scenario generation, calibration, protocol runs, metrics and the command line."""

from .calibrate import CalibrationFailed, calibrate_dilution, silence_holds
from .metrics import COLUMNS, MetricsRow, append_csv, read_csv, to_csv
from .runner import PROTOCOLS, RunConfig, RunResult, run_protocol, verify_artifacts
from .scenario import KINDS, Scenario, ScenarioError, Unsatisfiable, generate, load, loads, save, with_awake

__all__ = [
    "CalibrationFailed", "calibrate_dilution", "silence_holds", "COLUMNS", "MetricsRow", "append_csv",
    "read_csv", "to_csv", "PROTOCOLS", "RunConfig", "RunResult", "run_protocol", "verify_artifacts",
    "KINDS", "Scenario", "ScenarioError", "Unsatisfiable", "generate", "load", "loads", "save", "with_awake",
]
