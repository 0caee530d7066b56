"""
Rate functions of the trait.

Rates are built from named kinds plus parameters so that every function in a
scenario is inspectable and reproducible. All functions are vectorized over
numpy arrays and also accept plain floats.
"""

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np


class RateFunction(ABC):
    """Base class for a real function of the trait."""

    kind: str = "base"

    @abstractmethod
    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """Values at an array of traits."""

    @abstractmethod
    def parameters(self) -> Dict[str, Any]:
        """Parameters for reports and hashing."""

    def __call__(self, x):
        if np.ndim(x) == 0:
            return float(self.evaluate(np.array([float(x)]))[0])
        return self.evaluate(np.asarray(x, dtype=float))

    def describe(self) -> Dict[str, Any]:
        return {"kind": self.kind, **self.parameters()}

    def breakpoints(self) -> List[float]:
        """Points where the function is not smooth (hints for quadrature)."""
        return []


@dataclass(frozen=True)
class ConstantRate(RateFunction):
    value: float
    kind = "constant"

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.full(np.shape(x), float(self.value))

    def parameters(self) -> Dict[str, Any]:
        return {"value": self.value}


@dataclass(frozen=True)
class PolynomialRate(RateFunction):
    """sum_k c_k x^k, evaluated at x clipped to [-clamp_radius, clamp_radius] if set."""

    coefficients: Tuple[float, ...]
    clamp_radius: Optional[float] = None
    kind = "polynomial"

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        if self.clamp_radius is not None:
            x = np.clip(x, -self.clamp_radius, self.clamp_radius)
        return np.polynomial.polynomial.polyval(x, np.asarray(self.coefficients, dtype=float))

    def parameters(self) -> Dict[str, Any]:
        return {"coefficients": list(self.coefficients), "clamp_radius": self.clamp_radius}

    def breakpoints(self) -> List[float]:
        if self.clamp_radius is None:
            return []
        return [-self.clamp_radius, self.clamp_radius]


@dataclass(frozen=True)
class TentsRate(RateFunction):
    """max_j (peak_j - slope_j |x - center_j|)."""

    tents: Tuple[Tuple[float, float, float], ...]
    kind = "tents"

    def __post_init__(self):
        if not self.tents:
            raise ValueError("tents rate needs at least one (peak, slope, center) triple")
        for peak, slope, center in self.tents:
            if slope < 0:
                raise ValueError(f"tent slope must be nonnegative, got {slope}")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        values = [peak - slope * np.abs(x - center) for peak, slope, center in self.tents]
        return np.max(np.stack(values), axis=0)

    def parameters(self) -> Dict[str, Any]:
        return {"tents": [list(tent) for tent in self.tents]}

    def breakpoints(self) -> List[float]:
        return sorted(center for _, _, center in self.tents)

    def side_caps(self, decay: float) -> Tuple[float, float]:
        """Smallest (left, right) constants c with f(x) <= c - decay |x| on each half-line.

        Valid when every slope is at least ``decay``.
        """
        if any(slope < decay for _, slope, _ in self.tents):
            raise ValueError(f"tent slopes below decay rate {decay}")
        left = max(peak - decay * center for peak, _, center in self.tents)
        right = max(peak + decay * center for peak, _, center in self.tents)
        return left, right


@dataclass(frozen=True)
class TableRate(RateFunction):
    """Linear interpolation between (x, value) nodes, constant beyond the ends."""

    nodes: Tuple[Tuple[float, float], ...]
    kind = "table"

    def __post_init__(self):
        xs = [node[0] for node in self.nodes]
        if len(xs) < 2 or any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("table rate needs at least two nodes with increasing x")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        table = np.asarray(self.nodes, dtype=float)
        return np.interp(x, table[:, 0], table[:, 1])

    def parameters(self) -> Dict[str, Any]:
        return {"nodes": [list(node) for node in self.nodes]}

    def breakpoints(self) -> List[float]:
        return [node[0] for node in self.nodes]


@dataclass(frozen=True)
class WellRate(RateFunction):
    """``inner`` on |x - center| < half_width, ``outer`` elsewhere.

    Corners are smoothed by a C1 cubic step over ``width`` around each edge.
    """

    outer: float
    inner: float
    half_width: float
    width: float = 0.1
    center: float = 0.0
    kind = "well"

    def __post_init__(self):
        if self.half_width <= 0 or self.width < 0 or self.width > 2 * self.half_width:
            raise ValueError("well rate needs half_width > 0 and 0 <= width <= 2 half_width")

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        distance = np.abs(x - self.center)
        if self.width == 0:
            inside = (distance < self.half_width).astype(float)
        else:
            u = np.clip((self.half_width + 0.5 * self.width - distance) / self.width, 0.0, 1.0)
            inside = u * u * (3.0 - 2.0 * u)
        return self.outer + (self.inner - self.outer) * inside

    def parameters(self) -> Dict[str, Any]:
        return {
            "outer": self.outer,
            "inner": self.inner,
            "half_width": self.half_width,
            "width": self.width,
            "center": self.center,
        }

    def breakpoints(self) -> List[float]:
        edges = (self.half_width - 0.5 * self.width, self.half_width + 0.5 * self.width)
        return sorted({self.center + sign * edge for edge in edges for sign in (-1, 1)})


_RATE_KINDS = {
    "constant": ConstantRate,
    "polynomial": PolynomialRate,
    "tents": TentsRate,
    "table": TableRate,
    "well": WellRate,
}


def build_rate_function(spec: Any) -> RateFunction:
    """
    Build a rate function from a config mapping.

    Args:
        spec: A number (constant rate), a RateFunction (returned unchanged) or a
            mapping {"kind": ..., **parameters}.

    Returns:
        The RateFunction.
    """
    if isinstance(spec, RateFunction):
        return spec
    if isinstance(spec, (int, float)):
        return ConstantRate(float(spec))
    if not isinstance(spec, dict) or "kind" not in spec:
        raise ValueError(f"Rate function spec must be a number or a mapping with 'kind', got {spec!r}")
    params = dict(spec)
    kind = params.pop("kind")
    if kind not in _RATE_KINDS:
        raise ValueError(f"Unsupported rate function kind: {kind}")
    if kind == "polynomial":
        params["coefficients"] = tuple(float(c) for c in params["coefficients"])
    elif kind == "tents":
        params["tents"] = tuple(tuple(float(v) for v in tent) for tent in params["tents"])
    elif kind == "table":
        params["nodes"] = tuple(tuple(float(v) for v in node) for node in params["nodes"])
    try:
        return _RATE_KINDS[kind](**params)
    except TypeError as e:
        raise ValueError(f"Invalid parameters for {kind} rate function: {str(e)}")


def tent(peak: float, slope: float, center: float = 0.0) -> TentsRate:
    """Single tent peak - slope |x - center|."""
    return TentsRate(((float(peak), float(slope), float(center)),))


def sample_points(domain: Sequence[float], n_samples: int) -> np.ndarray:
    """Equispaced sample points of a closed interval."""
    return np.linspace(float(domain[0]), float(domain[1]), int(n_samples))
