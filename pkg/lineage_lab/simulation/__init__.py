"""
Stochastic simulation for lineage-lab.
This module contains the initial condition, the exact branching simulation with
ancestry and the spine estimator of expected counts.
"""

from .branching import (
    Ancestry,
    Fate,
    Individual,
    RunStats,
    SimulationResult,
    compensated_count,
    count_tube,
    count_window,
    exponent,
    lineage,
    lineage_sup_distances,
    run,
    second_moment_ratio,
)
from .feynman_kac import (
    Always,
    MeanCountEstimate,
    Never,
    PathPredicate,
    SpineSample,
    Tube,
    Window,
    estimate_mean_count,
    simulate_spine,
)
from .initial import InitialProfile, PopulationCapError, initial_profile, sample_initial

__all__ = [
    "Ancestry",
    "Fate",
    "Individual",
    "RunStats",
    "SimulationResult",
    "compensated_count",
    "count_tube",
    "count_window",
    "exponent",
    "lineage",
    "lineage_sup_distances",
    "run",
    "second_moment_ratio",
    "Always",
    "MeanCountEstimate",
    "Never",
    "PathPredicate",
    "SpineSample",
    "Tube",
    "Window",
    "estimate_mean_count",
    "simulate_spine",
    "InitialProfile",
    "PopulationCapError",
    "initial_profile",
    "sample_initial",
]
