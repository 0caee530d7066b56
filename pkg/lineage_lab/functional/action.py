"""
Action and cost functionals along discrete paths.

For an absolutely continuous path f the action is I_t(f) = ∫ L(f_s, f'_s) ds and
the cost is F_t(f) = beta0(f_0) + ∫ R(f_s) ds - I_t(f). Segments use the midpoint
trait and the exact segment slope, the same rule as the grid solver, so path
costs and solver values agree by construction.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np
from scipy.integrate import trapezoid

from lineage_lab.scenario.scenario import Scenario
from lineage_lab.utils.io import write_csv
from lineage_lab.utils.sentinel import POS_INF, Extended

from .paths import GridPath, Interpolation

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class CostProfile:
    """Running cost F_s and action I_s at every node of a path.

    Attributes:
        times: Node times s_k.
        f_values: F_{s_k}(f).
        i_values: I_{s_k}(f), cumulative action.
        action: I_t(f).
        terminal_cost: F_t(f), the last entry of f_values.
        min_running: min_k F_{s_k}(f).
    """

    times: np.ndarray
    f_values: np.ndarray
    i_values: np.ndarray
    action: float
    terminal_cost: float
    min_running: float

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write ``s,F_s,I_s`` rows."""
        rows = (
            {"s": float(s), "F_s": float(f), "I_s": float(i)}
            for s, f, i in zip(self.times, self.f_values, self.i_values)
        )
        return write_csv(path, ["s", "F_s", "I_s"], rows)


def _segments(path: GridPath):
    steps = np.diff(path.times)
    slopes = np.diff(path.values) / steps
    midpoints = 0.5 * (path.values[:-1] + path.values[1:])
    return steps, slopes, midpoints


def _segment_actions(s: Scenario, path: GridPath) -> np.ndarray:
    steps, slopes, midpoints = _segments(path)
    if steps.size == 0:
        return np.zeros(0)
    lagrangian, _ = s.kernel.lagrangian(s.mutation_rate(midpoints), slopes)
    return steps * np.asarray(lagrangian)


def action(s: Scenario, path: GridPath) -> Extended:
    """
    Action I_t of a path.

    Args:
        s: Scenario providing p and the kernel.
        path: Piecewise-linear path; a piecewise-constant path is accepted and
            has action 0 if it never jumps and POS_INF otherwise.

    Returns:
        Nonnegative action, or POS_INF for paths with jumps.
    """
    if path.interpolation is Interpolation.PIECEWISE_CONSTANT:
        return POS_INF if path.has_jumps else 0.0
    return float(np.sum(_segment_actions(s, path)))


def cost_profile(s: Scenario, path: GridPath) -> CostProfile:
    """
    F_s and I_s at every node of an absolutely continuous path.

    F_{s_{k+1}} - F_{s_k} = dt R(midpoint) - dt L(midpoint, slope) on each segment.

    Raises:
        ValueError: If the path has jumps.
    """
    if path.has_jumps:
        raise ValueError("cost_profile needs an absolutely continuous path; this lineage jumps")
    steps, _, midpoints = _segments(path)
    actions = _segment_actions(s, path)
    growth = steps * np.asarray(s.growth_rate(midpoints), dtype=float) if steps.size else np.zeros(0)
    i_values = np.concatenate([[0.0], np.cumsum(actions)])
    start = float(s.initial_exponent(float(path.values[0])))
    f_values = start + np.concatenate([[0.0], np.cumsum(growth - actions)])
    return CostProfile(
        times=path.times.copy(),
        f_values=f_values,
        i_values=i_values,
        action=float(i_values[-1]),
        terminal_cost=float(f_values[-1]),
        min_running=float(np.min(f_values)),
    )


def action_via_psi(s: Scenario, path: GridPath) -> float:
    """
    Action through the dual path psi = (H')^{-1}(f' / p(f)):

        I_t(f) = psi(t) f(t) - psi(0) f(0) - ∫ (f_s psi'(s) + p(f_s) H(psi(s))) ds.

    Slopes and psi' are central differences at the nodes and the integral is
    trapezoidal. The path should sample a C2 function; this is a cross-check of
    ``action`` and is not used by the solver.
    """
    if path.has_jumps:
        raise ValueError("action_via_psi needs an absolutely continuous path")
    if path.n_segments == 0:
        return 0.0
    times = path.times
    values = path.values
    edge_order = 2 if times.size > 2 else 1
    slopes = np.gradient(values, times, edge_order=edge_order)
    rates = np.asarray(s.mutation_rate(values), dtype=float)
    psi = np.asarray(s.kernel.h_prime_inverse(slopes / rates), dtype=float)
    psi_prime = np.gradient(psi, times, edge_order=edge_order)
    h, _, _ = s.kernel.h_value(psi)
    integrand = values * psi_prime + rates * np.asarray(h)
    boundary = psi[-1] * values[-1] - psi[0] * values[0]
    return float(boundary - trapezoid(integrand, times))
