"""
Grid solvers for lineage-lab.
This module contains the state-constrained dynamic programming solver, its
unconstrained mode and the residual and continuity diagnostics.
"""

from .variational import (
    NO_SOURCE,
    ContinuitySpread,
    SolverGridError,
    ValueField,
    a_continuity_spread,
    backtrack,
    continuity_spread,
    default_domain,
    default_v_max,
    hj_residual,
    residual_cells,
    solve,
    value_at,
)

__all__ = [
    "NO_SOURCE",
    "ContinuitySpread",
    "SolverGridError",
    "ValueField",
    "a_continuity_spread",
    "backtrack",
    "continuity_spread",
    "default_domain",
    "default_v_max",
    "hj_residual",
    "residual_cells",
    "solve",
    "value_at",
]
