"""
Path functionals for lineage-lab.
This module contains grid paths, sup-norm distances and the action and cost
functionals evaluated along them.
"""

from .action import CostProfile, action, action_via_psi, cost_profile
from .paths import GridPath, Interpolation, modulus_of_continuity, skorohod_radius, sup_distance

__all__ = [
    "GridPath",
    "Interpolation",
    "CostProfile",
    "action",
    "action_via_psi",
    "cost_profile",
    "modulus_of_continuity",
    "skorohod_radius",
    "sup_distance",
]
