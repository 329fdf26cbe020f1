"""Scenario runner tying the geometry, flow and spectral modules together."""

from .config import SCENARIOS, ConfigError, ScenarioConfig, config_from_dict, load_config
from .report import export_report, verify_report
from .scenarios import Check, ScenarioReport, run_scenario

__all__ = [
    "SCENARIOS",
    "Check",
    "ConfigError",
    "ScenarioConfig",
    "ScenarioReport",
    "config_from_dict",
    "export_report",
    "load_config",
    "run_scenario",
    "verify_report",
]
