"""Experiment harness: configuration, dataset files, orchestration, reports."""

from .config import ConfigError, ExperimentConfig, parse_config_text
from .reports import Report, write_report

__all__ = [
    "ConfigError",
    "ExperimentConfig",
    "parse_config_text",
    "Report",
    "write_report",
]
