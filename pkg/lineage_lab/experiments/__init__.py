"""
Experiment drivers for lineage-lab.
"""

from .compare import (
    ExponentReport,
    LineageReport,
    Observable,
    ReplicaOutcome,
    check_rows,
    config_observables,
    run_compare,
    run_estimate_mean,
    run_lineage_check,
    run_replicas,
    run_simulate,
    run_solve,
    solve_fields,
    summarize_exponents,
    window_sup,
)

__all__ = [
    "ExponentReport",
    "LineageReport",
    "Observable",
    "ReplicaOutcome",
    "check_rows",
    "config_observables",
    "run_compare",
    "run_estimate_mean",
    "run_lineage_check",
    "run_replicas",
    "run_simulate",
    "run_solve",
    "solve_fields",
    "summarize_exponents",
    "window_sup",
]
