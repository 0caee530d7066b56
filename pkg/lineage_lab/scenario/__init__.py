"""
Scenarios for lineage-lab.
This module contains the demographic rate functions, the standing-assumption
checks and the built-in benchmark scenarios.
"""

from .builtins import BUILTIN_SCENARIOS, get_builtin
from .rates import (
    ConstantRate,
    PolynomialRate,
    RateFunction,
    TableRate,
    TentsRate,
    WellRate,
    build_rate_function,
    tent,
)
from .scenario import Rates, Scenario, ScenarioBounds, ScenarioError, Violation

__all__ = [
    "Scenario",
    "ScenarioBounds",
    "ScenarioError",
    "Rates",
    "Violation",
    "RateFunction",
    "ConstantRate",
    "PolynomialRate",
    "TableRate",
    "TentsRate",
    "WellRate",
    "build_rate_function",
    "tent",
    "BUILTIN_SCENARIOS",
    "get_builtin",
]
