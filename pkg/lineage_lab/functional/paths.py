"""
Real-valued paths on a time grid.

Solver trajectories and reference paths are piecewise linear. Lineages are
piecewise constant and right-continuous, with nodes at their mutation times.
"""

import logging
import math
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Callable, Sequence, Union

import numpy as np

from lineage_lab.utils.io import read_csv, write_csv

logger = logging.getLogger(__name__)


class Interpolation(str, Enum):
    PIECEWISE_LINEAR = "piecewise_linear"
    PIECEWISE_CONSTANT = "piecewise_constant"


@dataclass(frozen=True, eq=False)
class GridPath:
    """A path given by its values at increasing node times.

    For PIECEWISE_CONSTANT paths ``values[i]`` holds on ``[times[i], times[i+1])`` and
    the last value holds at the final time.

    Attributes:
        times: Strictly increasing node times (at least one).
        values: Finite values at the nodes.
        interpolation: How the path is defined between nodes.
    """

    times: np.ndarray
    values: np.ndarray
    interpolation: Interpolation = Interpolation.PIECEWISE_LINEAR

    def __post_init__(self):
        times = np.array(self.times, dtype=float).reshape(-1)
        values = np.array(self.values, dtype=float).reshape(-1)
        if times.size == 0 or times.size != values.size:
            raise ValueError(f"Path needs matching nonempty times and values, got {times.size} and {values.size}")
        if not np.all(np.isfinite(times)) or not np.all(np.isfinite(values)):
            raise ValueError("Path times and values must be finite")
        if np.any(np.diff(times) <= 0):
            raise ValueError("Path times must be strictly increasing")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "interpolation", Interpolation(self.interpolation))

    @classmethod
    def uniform(
        cls,
        t0: float,
        dt: float,
        values: Sequence[float],
        interpolation: Interpolation = Interpolation.PIECEWISE_LINEAR,
    ) -> "GridPath":
        """Path with nodes t0, t0+dt, ..., t0+n dt."""
        if not dt > 0:
            raise ValueError(f"dt must be positive, got {dt}")
        values = np.asarray(values, dtype=float)
        return cls(t0 + dt * np.arange(values.size), values, interpolation)

    @classmethod
    def from_function(cls, fn: Callable[[np.ndarray], np.ndarray], t0: float, t_end: float, dt: float) -> "GridPath":
        """Piecewise-linear path sampling fn on a uniform grid (the last step may be shorter)."""
        if not t_end >= t0:
            raise ValueError(f"Empty time interval [{t0}, {t_end}]")
        n = max(int(math.ceil((t_end - t0) / dt - 1e-9)), 0)
        times = np.minimum(t0 + dt * np.arange(n + 1), t_end)
        if n > 0:
            times[-1] = t_end
        return cls(times, np.asarray(fn(times), dtype=float) * np.ones_like(times))

    @classmethod
    def constant(cls, value: float, t0: float, t_end: float) -> "GridPath":
        """Constant path over [t0, t_end]."""
        if t_end > t0:
            return cls(np.array([t0, t_end]), np.array([value, value]))
        return cls(np.array([t0]), np.array([value]))

    @classmethod
    def straight(cls, x_start: float, x_end: float, t0: float, t_end: float, n_segments: int) -> "GridPath":
        """Straight line from x_start to x_end on n_segments equal steps."""
        times = np.linspace(t0, t_end, n_segments + 1)
        return cls(times, np.linspace(x_start, x_end, n_segments + 1))

    @property
    def t0(self) -> float:
        return float(self.times[0])

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    @property
    def duration(self) -> float:
        return self.t_end - self.t0

    @property
    def n_segments(self) -> int:
        return self.times.size - 1

    @property
    def is_uniform(self) -> bool:
        if self.n_segments < 2:
            return True
        steps = np.diff(self.times)
        return bool(np.max(np.abs(steps - steps[0])) <= 1e-9 * max(abs(self.t_end), 1.0))

    @property
    def dt(self) -> float:
        """Uniform step; zero for a single-point path."""
        if self.n_segments == 0:
            return 0.0
        if not self.is_uniform:
            raise ValueError("Path has a nonuniform time grid")
        return float(self.times[1] - self.times[0])

    @property
    def has_jumps(self) -> bool:
        """Whether a piecewise-constant path changes value (it is then not absolutely continuous)."""
        if self.interpolation is not Interpolation.PIECEWISE_CONSTANT:
            return False
        return bool(np.any(np.diff(self.values) != 0))

    def slopes(self) -> np.ndarray:
        """Segment slopes of a piecewise-linear path."""
        return np.diff(self.values) / np.diff(self.times)

    def _check_range(self, t: np.ndarray) -> None:
        slack = 1e-12 * max(abs(self.t_end), 1.0)
        if np.any(t < self.t0 - slack) or np.any(t > self.t_end + slack):
            raise ValueError(f"Time outside path domain [{self.t0}, {self.t_end}]")

    def value_at(self, t: Union[float, np.ndarray]):
        """Path value at time(s) t (right-continuous for piecewise-constant paths)."""
        query = np.atleast_1d(np.asarray(t, dtype=float))
        self._check_range(query)
        if self.interpolation is Interpolation.PIECEWISE_LINEAR:
            result = np.interp(query, self.times, self.values)
        else:
            index = np.clip(np.searchsorted(self.times, query, side="right") - 1, 0, self.values.size - 1)
            result = self.values[index]
        return float(result[0]) if np.ndim(t) == 0 else result

    def left_limit(self, t: Union[float, np.ndarray]):
        """Limit from the left at time(s) t; equals value_at at t0."""
        query = np.atleast_1d(np.asarray(t, dtype=float))
        self._check_range(query)
        if self.interpolation is Interpolation.PIECEWISE_LINEAR:
            result = np.interp(query, self.times, self.values)
        else:
            index = np.clip(np.searchsorted(self.times, query, side="left") - 1, 0, self.values.size - 1)
            result = self.values[index]
        return float(result[0]) if np.ndim(t) == 0 else result

    def restrict(self, t_end: float) -> "GridPath":
        """The path on [t0, t_end]; a node is added at t_end if needed."""
        self._check_range(np.array([t_end]))
        keep = self.times < t_end
        times = np.append(self.times[keep], t_end)
        values = np.append(self.values[keep], self.value_at(t_end))
        if times.size > 1 and times[-1] - times[-2] <= 1e-12 * max(abs(t_end), 1.0):
            times, values = times[:-1], values[:-1]
        return GridPath(times, values, self.interpolation)

    def reversed(self) -> "GridPath":
        """Time reversal s -> t0 + t_end - s of a piecewise-linear path."""
        if self.interpolation is not Interpolation.PIECEWISE_LINEAR:
            raise ValueError("Only piecewise-linear paths can be reversed")
        return GridPath(self.t0 + self.t_end - self.times[::-1], self.values[::-1])

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write ``time,value`` rows."""
        rows = ({"time": float(t), "value": float(v)} for t, v in zip(self.times, self.values))
        return write_csv(path, ["time", "value"], rows)

    @classmethod
    def from_csv(
        cls, path: Union[str, Path], interpolation: Interpolation = Interpolation.PIECEWISE_LINEAR
    ) -> "GridPath":
        """Read a path written by to_csv (or any CSV with time and value columns)."""
        rows = read_csv(path)
        if not rows:
            raise ValueError(f"Path file {path} has no rows")
        try:
            times = [float(row["time"]) for row in rows]
            values = [float(row["value"]) for row in rows]
        except (KeyError, ValueError) as e:
            raise ValueError(f"Path file {path} needs numeric time and value columns: {str(e)}")
        return cls(np.array(times), np.array(values), interpolation)


def sup_distance(first: GridPath, second: GridPath) -> float:
    """
    Exact sup-norm distance between two paths over their common time interval.

    Between consecutive merged nodes both paths are affine, so the supremum is
    attained at a one-sided limit at some node.
    """
    start = max(first.t0, second.t0)
    end = min(first.t_end, second.t_end)
    if end < start:
        raise ValueError("Paths have no common time interval")
    nodes = np.concatenate([first.times, second.times, [start, end]])
    nodes = np.unique(nodes[(nodes >= start) & (nodes <= end)])
    gaps = np.abs(first.value_at(nodes) - second.value_at(nodes))
    if nodes.size > 1:
        left = np.abs(first.left_limit(nodes[1:]) - second.left_limit(nodes[1:]))
        gaps = np.concatenate([gaps, left])
    return float(np.max(gaps))


def modulus_of_continuity(path: GridPath, delta: float, resolution: int = 4) -> float:
    """
    omega(f, delta) = sup over |s - u| <= delta of |f(s) - f(u)|.

    Evaluated on a refinement of the node grid with ``resolution`` points per
    shortest step, which is exact up to that spacing for piecewise-linear paths.
    """
    if delta < 0:
        raise ValueError(f"delta must be nonnegative, got {delta}")
    if path.n_segments == 0 or delta == 0:
        return 0.0
    if delta >= path.duration:
        return float(np.ptp(path.values))
    step = min(float(np.min(np.diff(path.times))), delta) / resolution
    grid = np.append(np.arange(path.t0, path.t_end, step), path.t_end)
    samples = path.value_at(grid)
    window = int(math.floor(delta / step)) + 1
    if window >= samples.size:
        return float(np.ptp(samples))
    views = np.lib.stride_tricks.sliding_window_view(samples, window)
    return float(np.max(views.max(axis=1) - views.min(axis=1)))


def skorohod_radius(eps: float, path: GridPath) -> float:
    """
    Sup-norm radius containing the Skorohod ball of radius eps around an
    absolutely continuous path: 2 eps + omega(f, (e^eps - 1) t).
    """
    if eps < 0:
        raise ValueError(f"eps must be nonnegative, got {eps}")
    return 2.0 * eps + modulus_of_continuity(path, math.expm1(eps) * path.duration)
