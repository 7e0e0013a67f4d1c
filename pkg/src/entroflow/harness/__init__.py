"""Scenario configs, runners, reports and the command line."""

from .catalog import bundled_scenarios, load_scenario
from .config import DEFAULT_TOLERANCES, ConfigError, ScenarioConfig, dump_config, load_config
from .report import EntropyReport, emit_outputs
from .runners import convergence_study, run_scenario

__all__ = [
    "DEFAULT_TOLERANCES", "ConfigError", "ScenarioConfig", "EntropyReport", "bundled_scenarios",
    "load_scenario", "load_config", "dump_config", "run_scenario", "convergence_study", "emit_outputs",
]
