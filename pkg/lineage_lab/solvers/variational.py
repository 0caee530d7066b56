"""
State-constrained value function by semi-Lagrangian dynamic programming.

On a uniform (t, x) grid the value satisfies

    u(t_{k+1}, x_i) = max_j { u(t_k, x_j) + dt (R(x_i) - L((x_i + x_j) / 2, (x_i - x_j) / dt)) }

over unmasked sources x_j with |x_i - x_j| <= v_max dt. With a finite constraint
level a, cells whose value falls below a are masked after every step, so only
trajectories whose running cost stays above a survive. With a = NEG_INF nothing
is pruned and the scheme solves the unconstrained equation on the whole domain.
"""

import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, Optional, Sequence, Tuple, Union

import numpy as np

from lineage_lab.functional.paths import GridPath
from lineage_lab.kernels.base import KernelSaturationError
from lineage_lab.scenario.scenario import Scenario
from lineage_lab.utils.constants import (
    DEFAULT_A_LEVELS,
    DEFAULT_SMOOTHNESS_THRESHOLD,
    DEFAULT_TAIL_TOL,
    TRUNCATION_REFERENCE_K,
)
from lineage_lab.utils.io import write_csv, write_json
from lineage_lab.utils.sentinel import NEG_INF, POS_INF, Extended, is_infinite

logger = logging.getLogger(__name__)

NO_SOURCE = np.iinfo(np.int32).min

# Relative slack when checking that T/dt and the domain width/dx are integers
_GRID_SLACK = 1e-9


class SolverGridError(ValueError):
    """Raised for grids the solver cannot use."""


def _as_level(a: Union[float, Extended, None]) -> Extended:
    if a is None:
        return NEG_INF
    if is_infinite(a):
        if a < 0:
            return NEG_INF
        raise SolverGridError("Constraint level POS_INF masks every cell")
    level = float(a)
    if math.isnan(level) or level == math.inf:
        raise SolverGridError(f"Constraint level must be finite or NEG_INF, got {a}")
    return NEG_INF if level == -math.inf else level


@dataclass(frozen=True, eq=False)
class ValueField:
    """Grid values of the constrained value function.

    Attributes:
        a: Constraint level, NEG_INF when unconstrained.
        t_grid: Times 0, dt, ..., T.
        x_grid: Traits x_min, x_min + dx, ..., x_max.
        values: Array (n_t, n_x); NaN in masked cells.
        masked: Boolean array (n_t, n_x); True outside the surviving set.
        source_offset: Index offset j - i of the maximizing source, NO_SOURCE where none.
        v_max: Velocity bound.
        boundary_hits: Unmasked cells whose maximizer sits at the velocity bound.
        extinct_from: First time index at which every cell is masked, if any.
        scenario_hash: Hash of the scenario that produced the field.
    """

    a: Extended
    t_grid: np.ndarray
    x_grid: np.ndarray
    values: np.ndarray
    masked: np.ndarray
    source_offset: Optional[np.ndarray] = None
    v_max: Optional[float] = None
    boundary_hits: int = 0
    extinct_from: Optional[int] = None
    scenario_hash: str = ""
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        shape = (self.t_grid.size, self.x_grid.size)
        if self.values.shape != shape or self.masked.shape != shape:
            raise SolverGridError(f"Field arrays must have shape {shape}")
        if self.source_offset is not None and self.source_offset.shape != shape:
            raise SolverGridError(f"Source offsets must have shape {shape}")

    @classmethod
    def from_values(
        cls,
        values: np.ndarray,
        t_grid: np.ndarray,
        x_grid: np.ndarray,
        a: Extended = NEG_INF,
        masked: Optional[np.ndarray] = None,
    ) -> "ValueField":
        """Wrap externally computed values (no sources, no velocity bound)."""
        values = np.asarray(values, dtype=float)
        if masked is None:
            masked = ~np.isfinite(values)
        values = np.where(masked, np.nan, values)
        return cls(
            a=_as_level(a),
            t_grid=np.asarray(t_grid, dtype=float),
            x_grid=np.asarray(x_grid, dtype=float),
            values=values,
            masked=np.asarray(masked, dtype=bool),
        )

    @property
    def dt(self) -> float:
        return float(self.t_grid[1] - self.t_grid[0]) if self.t_grid.size > 1 else 0.0

    @property
    def dx(self) -> float:
        return float(self.x_grid[1] - self.x_grid[0])

    @property
    def constrained(self) -> bool:
        return not is_infinite(self.a)

    @property
    def grid_tolerance(self) -> float:
        """tol_g = dt + dx."""
        return self.dt + self.dx

    def omega_mask(self, tol: float = 0.0) -> np.ndarray:
        """Cells strictly inside the surviving set: unmasked with value > a + tol."""
        if not self.constrained:
            return ~self.masked
        with np.errstate(invalid="ignore"):
            return ~self.masked & (self.values > self.a + tol)

    def boundary_mask(self, tol: Optional[float] = None) -> np.ndarray:
        """Unmasked cells with value in [a, a + tol] (tol defaults to tol_g)."""
        if not self.constrained:
            return np.zeros_like(self.masked)
        tol = self.grid_tolerance if tol is None else tol
        with np.errstate(invalid="ignore"):
            return ~self.masked & (self.values <= self.a + tol)

    def mask_adjacent(self) -> np.ndarray:
        """Unmasked cells with a masked neighbor in x at the same time."""
        neighbor = np.zeros_like(self.masked)
        neighbor[:, 1:] |= self.masked[:, :-1]
        neighbor[:, :-1] |= self.masked[:, 1:]
        return ~self.masked & neighbor

    def describe(self) -> Dict[str, object]:
        return {
            "a": str(self.a) if is_infinite(self.a) else self.a,
            "T": float(self.t_grid[-1]),
            "dt": self.dt,
            "n_t": int(self.t_grid.size),
            "x_min": float(self.x_grid[0]),
            "x_max": float(self.x_grid[-1]),
            "dx": self.dx,
            "n_x": int(self.x_grid.size),
            "v_max": self.v_max,
            "boundary_hits": self.boundary_hits,
            "extinct_from": self.extinct_from,
            "scenario_hash": self.scenario_hash,
            **self.metadata,
        }

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write ``t,x,value,source_offset`` rows (value MASKED outside the surviving set)
        and the metadata as JSON next to the CSV file."""
        path = Path(path)
        offsets = self.source_offset

        def rows():
            for k, t in enumerate(self.t_grid):
                for i, x in enumerate(self.x_grid):
                    offset = "" if offsets is None or offsets[k, i] == NO_SOURCE else int(offsets[k, i])
                    yield {
                        "t": float(t),
                        "x": float(x),
                        "value": "MASKED" if self.masked[k, i] else float(self.values[k, i]),
                        "source_offset": offset,
                    }

        write_csv(path, ["t", "x", "value", "source_offset"], rows())
        write_json(path.with_suffix(".json"), self.describe())
        return path


def _grid(lo: float, hi: float, step: float, what: str) -> np.ndarray:
    count = (hi - lo) / step
    n = int(round(count))
    if n < 1 or abs(count - n) > _GRID_SLACK * max(count, 1.0):
        raise SolverGridError(f"{what} width {hi - lo} is not a positive multiple of the step {step}")
    return lo + step * np.arange(n + 1)


def _offset_order(max_offset: int) -> np.ndarray:
    """Source offsets by tie-break priority: smallest |offset| first, then the smaller source."""
    order = [0]
    for k in range(1, max_offset + 1):
        order.extend([-k, k])
    return np.array(order, dtype=np.int64)


def _step_costs(s: Scenario, x_grid: np.ndarray, dt: float, offsets: np.ndarray) -> np.ndarray:
    """cost[o, i] = dt (R(x_i) - L(x_i + o dx / 2, -o dx / dt)) for source x_j = x_i + o dx."""
    dx = float(x_grid[1] - x_grid[0])
    midpoints = x_grid[None, :] + 0.5 * dx * offsets[:, None]
    velocity = np.broadcast_to(-dx * offsets[:, None] / dt, midpoints.shape)
    lagrangian, _ = s.kernel.lagrangian(s.mutation_rate(midpoints.ravel()), velocity.ravel())
    growth = np.asarray(s.growth_rate(x_grid), dtype=float)
    return dt * (growth[None, :] - np.asarray(lagrangian).reshape(midpoints.shape))


def solve(
    s: Scenario,
    a: Union[float, Extended, None],
    T: float,
    dt: float,
    dx: float,
    v_max: float,
    domain: Optional[Tuple[float, float]] = None,
    K: Optional[float] = None,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> ValueField:
    """
    Solve for the constrained value u_a on a uniform grid.

    Args:
        s: Scenario.
        a: Constraint level; NEG_INF (or None, or -inf) for the unconstrained problem.
        T: Final time, a multiple of dt.
        dt: Time step.
        dx: Trait step; the domain width must be a multiple of it.
        v_max: Velocity bound, at least dx / dt.
        domain: Trait interval; defaults to ``default_domain`` at scale K.
        K: Population scale of the default domain; the truncation reference scale if omitted.
        tail_tol: Relative tail mass of the default domain.

    Returns:
        ValueField. A step at which every cell is masked starts a fully masked
        tail, recorded in ``extinct_from``.

    Raises:
        SolverGridError: For invalid grids.
    """
    level = _as_level(a)
    if not dt > 0 or not dx > 0:
        raise SolverGridError(f"Steps must be positive, got dt={dt}, dx={dx}")
    if not v_max > 0:
        raise SolverGridError(f"v_max must be positive, got {v_max}")
    if dx / dt > v_max * (1 + _GRID_SLACK):
        raise SolverGridError(f"dx/dt={dx / dt} exceeds v_max={v_max}: neighbors are unreachable")
    if T < 0:
        raise SolverGridError(f"T must be nonnegative, got {T}")
    n_steps = int(round(T / dt))
    if abs(T / dt - n_steps) > _GRID_SLACK * max(T / dt, 1.0):
        raise SolverGridError(f"T={T} is not a multiple of dt={dt}")
    lo, hi = domain or default_domain(s, T, dx, level, TRUNCATION_REFERENCE_K if K is None else K, tail_tol)
    x_grid = _grid(lo, hi, dx, "Domain")
    t_grid = dt * np.arange(n_steps + 1)
    n_x = x_grid.size

    start_time = time.time()
    max_offset = int(math.floor(v_max * dt / dx * (1 + _GRID_SLACK)))
    offsets = _offset_order(max_offset)
    try:
        costs = _step_costs(s, x_grid, dt, offsets)
    except KernelSaturationError as e:
        raise SolverGridError(f"v_max={v_max} is beyond the kernel's exponential moments: {str(e)}")

    values = np.full((n_steps + 1, n_x), np.nan)
    masked = np.ones((n_steps + 1, n_x), dtype=bool)
    sources = np.full((n_steps + 1, n_x), NO_SOURCE, dtype=np.int32)

    current = np.asarray(s.initial_exponent(x_grid), dtype=float)
    if not is_infinite(level):
        current = np.where(current >= level, current, -np.inf)
    masked[0] = ~np.isfinite(current)
    values[0] = np.where(masked[0], np.nan, current)

    boundary_hits = 0
    extinct_from = None if np.any(~masked[0]) else 0
    for k in range(1, n_steps + 1):
        if extinct_from is not None:
            break
        best = np.full(n_x, -np.inf)
        best_offset = np.full(n_x, NO_SOURCE, dtype=np.int32)
        for row, offset in enumerate(offsets):
            candidate = np.full(n_x, -np.inf)
            if offset >= 0:
                candidate[: n_x - offset] = current[offset:] + costs[row, : n_x - offset]
            else:
                candidate[-offset:] = current[: n_x + offset] + costs[row, -offset:]
            better = candidate > best
            best = np.where(better, candidate, best)
            best_offset = np.where(better, offset, best_offset)
        if not is_infinite(level):
            best = np.where(best >= level, best, -np.inf)
        alive = np.isfinite(best)
        best_offset = np.where(alive, best_offset, NO_SOURCE)
        if max_offset > 0:
            boundary_hits += int(np.count_nonzero(alive & (np.abs(best_offset) == max_offset)))
        masked[k] = ~alive
        values[k] = np.where(alive, best, np.nan)
        sources[k] = best_offset
        current = best
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug(f"Step {k}/{n_steps}: {int(np.count_nonzero(~alive))} of {n_x} cells masked")
        if not np.any(alive):
            extinct_from = k

    if extinct_from is not None:
        logger.warning(f"Every cell is masked from t={t_grid[extinct_from]:.4f} on (a={level})")
    if boundary_hits:
        logger.warning(f"{boundary_hits} cells reached the velocity bound v_max={v_max}; increase v_max")
    logger.info(
        f"Solved {s.name} with a={level}, T={T}, dt={dt}, dx={dx}, v_max={v_max} "
        f"on {n_x} traits in {time.time() - start_time:.2f} seconds"
    )
    return ValueField(
        a=level,
        t_grid=t_grid,
        x_grid=x_grid,
        values=values,
        masked=masked,
        source_offset=sources,
        v_max=float(v_max),
        boundary_hits=boundary_hits,
        extinct_from=extinct_from,
        scenario_hash=s.scenario_hash,
    )


def _locate(grid: np.ndarray, value: float, what: str) -> Tuple[int, float]:
    """Cell index and fractional position, snapping to nodes within rounding."""
    if grid.size == 1:
        if abs(value - grid[0]) > _GRID_SLACK * max(abs(grid[0]), 1.0):
            raise ValueError(f"{what}={value} outside grid [{grid[0]}, {grid[0]}]")
        return 0, 0.0
    step = grid[1] - grid[0]
    position = (value - grid[0]) / step
    nearest = int(round(position))
    if abs(position - nearest) <= 1e-9:
        position = float(nearest)
    if position < 0 or position > grid.size - 1:
        raise ValueError(f"{what}={value} outside grid [{grid[0]}, {grid[-1]}]")
    index = min(int(math.floor(position)), grid.size - 2)
    return index, position - index


def value_at(field: ValueField, t: float, x: float) -> Extended:
    """
    Bilinear interpolation of the field; NEG_INF if a contributing corner is masked.

    Raises:
        ValueError: If (t, x) lies outside the grids.
    """
    k, wt = _locate(field.t_grid, t, "t")
    i, wx = _locate(field.x_grid, x, "x")
    total = 0.0
    for dk, weight_t in ((0, 1.0 - wt), (1, wt)):
        for di, weight_x in ((0, 1.0 - wx), (1, wx)):
            weight = weight_t * weight_x
            if weight == 0.0:
                continue
            if field.masked[k + dk, i + di]:
                return NEG_INF
            total += weight * float(field.values[k + dk, i + di])
    return total


def backtrack(field: ValueField, t: float, x: float) -> GridPath:
    """
    Optimal trajectory ending at the node nearest to (t, x).

    Follows the recorded maximizing sources back to time 0.

    Raises:
        ValueError: If the node is masked or the field carries no sources.
    """
    if field.source_offset is None:
        raise ValueError("Field has no recorded sources to backtrack")
    k = int(round((t - field.t_grid[0]) / field.dt)) if field.t_grid.size > 1 else 0
    i = int(round((x - field.x_grid[0]) / field.dx))
    if not (0 <= k < field.t_grid.size and 0 <= i < field.x_grid.size):
        raise ValueError(f"({t}, {x}) outside the field grids")
    if field.masked[k, i]:
        raise ValueError(f"Cannot backtrack from masked node (t={field.t_grid[k]}, x={field.x_grid[i]})")
    positions = [i]
    for step in range(k, 0, -1):
        offset = int(field.source_offset[step, i])
        i += offset
        positions.append(i)
    positions.reverse()
    return GridPath(field.t_grid[: k + 1].copy(), field.x_grid[positions])


def residual_cells(
    field: ValueField, s: Scenario, smoothness_threshold: float = DEFAULT_SMOOTHNESS_THRESHOLD
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Pointwise residual |u_t - p(x) H(u_x) - R(x)| by centered differences.

    Returns:
        (residuals, candidates): residuals is NaN where a cell is not tested;
        candidates marks interior cells whose four neighbors are unmasked.
    """
    shape = field.values.shape
    residuals = np.full(shape, np.nan)
    candidates = np.zeros(shape, dtype=bool)
    if shape[0] < 3 or shape[1] < 3:
        return residuals, candidates
    u = field.values
    open_ = ~field.masked
    center = (slice(1, -1), slice(1, -1))
    candidates[center] = (
        open_[1:-1, 1:-1] & open_[2:, 1:-1] & open_[:-2, 1:-1] & open_[1:-1, 2:] & open_[1:-1, :-2]
    )
    dt, dx = field.dt, field.dx
    with np.errstate(invalid="ignore"):
        u_t = (u[2:, 1:-1] - u[:-2, 1:-1]) / (2 * dt)
        u_x = (u[1:-1, 2:] - u[1:-1, :-2]) / (2 * dx)
        u_tt = np.abs(u[2:, 1:-1] - 2 * u[1:-1, 1:-1] + u[:-2, 1:-1]) / dt**2
        u_xx = np.abs(u[1:-1, 2:] - 2 * u[1:-1, 1:-1] + u[1:-1, :-2]) / dx**2
    smooth = candidates[center] & (u_tt <= smoothness_threshold) & (u_xx <= smoothness_threshold)
    smooth &= np.abs(np.nan_to_num(u_x, nan=np.inf)) <= s.kernel.alpha_max
    tested = np.zeros(shape, dtype=bool)
    tested[center] = smooth
    if np.any(tested):
        x = np.broadcast_to(field.x_grid[None, 1:-1], u_x.shape)[smooth]
        h, _, _ = s.kernel.h_value(u_x[smooth])
        residual = np.abs(u_t[smooth] - s.mutation_rate(x) * h - s.growth_rate(x))
        residuals[tested] = residual
    return residuals, candidates


def hj_residual(
    field: ValueField, s: Scenario, smoothness_threshold: float = DEFAULT_SMOOTHNESS_THRESHOLD
) -> Tuple[float, float]:
    """
    Largest residual of u_t = p(x) H(u_x) + R(x) over locally smooth interior cells.

    Returns:
        (max_residual, interior_fraction): the fraction is tested cells over
        interior cells with unmasked neighbors.
    """
    residuals, candidates = residual_cells(field, s, smoothness_threshold)
    tested = np.isfinite(residuals)
    n_candidates = int(np.count_nonzero(candidates))
    if not np.any(tested):
        return 0.0, 0.0
    return float(np.max(residuals[tested])), float(np.count_nonzero(tested)) / n_candidates


def default_v_max(
    s: Scenario,
    T: float,
    dt: float,
    a: Union[float, Extended, None] = 0.0,
    domain: Optional[Tuple[float, float]] = None,
    start: float = 1.0,
    n_points: int = 201,
) -> float:
    """
    Smallest velocity on the ladder start, 2 start, 4 start, ... with
    dt L(x, v) > 2 (beta_bar + R_bar T - a) at every sampled x.

    A single step at such a velocity costs more than the whole attainable range
    of values, so it is never optimal. For the unconstrained problem, a is
    replaced by the lowest value a trajectory can reach without moving.
    """
    level = _as_level(a)
    lo, hi = domain or s.domain
    x = np.linspace(lo, hi, n_points)
    bounds = s.bounds
    if is_infinite(level):
        floor_growth = min(float(np.min(s.growth_rate(x))), 0.0)
        level = float(np.min(s.initial_exponent(x))) + floor_growth * T
    budget = 2.0 * (bounds.beta_bar + bounds.r_bar * T - level)
    rates = np.asarray(s.mutation_rate(x), dtype=float)
    velocity = float(start)
    for _ in range(64):
        try:
            lagrangian, _ = s.kernel.lagrangian(rates, np.full_like(rates, velocity))
        except KernelSaturationError as e:
            raise SolverGridError(f"No admissible v_max below the kernel's saturation: {str(e)}")
        if dt * float(np.min(lagrangian)) > budget:
            logger.debug(f"default v_max={velocity} for {s.name} (budget {budget:.4g})")
            return velocity
        velocity *= 2.0
    raise SolverGridError("default_v_max did not find a velocity bound")


def default_domain(
    s: Scenario,
    T: float,
    dx: float,
    a: Union[float, Extended, None] = 0.0,
    K: float = TRUNCATION_REFERENCE_K,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> Tuple[float, float]:
    """
    Truncation interval at K padded by the farthest excursion over [0, T], on multiples of dx.

    L is convex in v, so a path covering a distance D in time T costs at least
    T L(D / T). The excursion speed is therefore the velocity bound of a single
    step of length T, and paths leaving the padded interval never reach level a.
    """
    speed = default_v_max(s, T, T, a) if T > 0 else 0.0
    lo, hi = s.working_domain(T, speed, K, tail_tol)
    return dx * math.floor(lo / dx), dx * math.ceil(hi / dx)


@dataclass(frozen=True)
class ContinuitySpread:
    """Values u_a(t, x) at several constraint levels and their spread."""

    values: Dict[float, Extended]
    spread: Extended


def a_continuity_spread(
    s: Scenario,
    t: float,
    x: float,
    T: float,
    dt: float,
    dx: float,
    v_max: float,
    levels: Sequence[float] = DEFAULT_A_LEVELS,
    domain: Optional[Tuple[float, float]] = None,
) -> ContinuitySpread:
    """
    Solve at several levels a and report max - min of u_a(t, x).

    The spread is 0 when every level masks the point and POS_INF when only
    some do.
    """
    values = {}
    for level in levels:
        values[float(level)] = value_at(solve(s, level, T, dt, dx, v_max, domain), t, x)
    return continuity_spread(values)


def continuity_spread(values: Dict[float, Extended]) -> ContinuitySpread:
    """Spread of values already read off fields solved at several levels."""
    finite = [v for v in values.values() if not is_infinite(v)]
    if not finite:
        spread: Extended = 0.0
    elif len(finite) < len(values):
        spread = POS_INF
    else:
        spread = max(finite) - min(finite)
    return ContinuitySpread(values=dict(values), spread=spread)
