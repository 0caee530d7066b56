"""
Configuration parsing for lineage-lab.
"""

from .config import (
    AcceptanceSection,
    ConfigError,
    ExperimentConfig,
    TubeObservable,
    WindowObservable,
    build_kernel,
    build_scenario,
    load_config,
)

__all__ = [
    "AcceptanceSection",
    "ConfigError",
    "ExperimentConfig",
    "TubeObservable",
    "WindowObservable",
    "build_kernel",
    "build_scenario",
    "load_config",
]
