"""
Tabulated symmetric mutation kernel.

The density is given as sorted (y, G(y)) pairs and interpolated linearly, with
zero mass outside the table. Truncated support departs from the standing
assumption that G is positive on the whole line; such kernels are accepted and
flagged through ``truncated``.
"""

import logging
from typing import Any, Dict, Sequence, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid, trapezoid

from lineage_lab.utils.constants import (
    NORMALIZATION_TOL,
    SIMPSON_INITIAL_NODES,
    SIMPSON_MAX_NODES,
)

from .base import BaseMutationKernel

logger = logging.getLogger(__name__)

# Evaluate moments in chunks of alpha values to bound memory
_CHUNK = 2048


def _simpson_rule(breaks: np.ndarray, panels: int) -> Tuple[np.ndarray, np.ndarray]:
    """Composite Simpson nodes and weights, ``panels`` (even) panels per segment."""
    nodes = []
    weights = []
    pattern = np.ones(panels + 1)
    pattern[1:-1:2] = 4.0
    pattern[2:-1:2] = 2.0
    for left, right in zip(breaks[:-1], breaks[1:]):
        step = (right - left) / panels
        nodes.append(np.linspace(left, right, panels + 1))
        weights.append(pattern * step / 3.0)
    y = np.concatenate(nodes)
    w = np.concatenate(weights)
    # Merge the shared endpoints of adjacent segments
    unique, inverse = np.unique(y, return_inverse=True)
    merged = np.zeros_like(unique)
    np.add.at(merged, inverse, w)
    return unique, merged


class TabulatedKernel(BaseMutationKernel):
    """Symmetrized, normalized, piecewise-linear density."""

    kind = "tabulated"

    def __init__(self, nodes: Sequence[Tuple[float, float]], **kwargs):
        super().__init__(**kwargs)
        table = np.asarray(nodes, dtype=float)
        if table.ndim != 2 or table.shape[1] != 2 or table.shape[0] < 2:
            raise ValueError("Tabulated kernel needs at least two (y, G(y)) pairs")
        y, g = table[:, 0], table[:, 1]
        if np.any(np.diff(y) <= 0):
            raise ValueError("Tabulated kernel nodes must be sorted by strictly increasing y")
        if np.any(g < 0) or not np.all(np.isfinite(g)):
            raise ValueError("Tabulated kernel values must be finite and nonnegative")

        self.raw_nodes = table
        symmetric_y = np.unique(np.concatenate([y, -y]))

        def interpolate(points):
            return np.interp(points, y, g, left=0.0, right=0.0)

        direct = interpolate(symmetric_y)
        mirrored = interpolate(-symmetric_y)
        asymmetry = float(np.max(np.abs(direct - mirrored)))
        if asymmetry > 1e-8 * float(np.max(g)):
            logger.warning(f"Tabulated kernel is not even (max |G(y)-G(-y)|={asymmetry:.3g}); symmetrizing")
        density = 0.5 * (direct + mirrored)
        mass = float(trapezoid(density, symmetric_y))
        if mass <= 0:
            raise ValueError("Tabulated kernel has zero mass")
        self.y_nodes = symmetric_y
        self.g_nodes = density / mass
        self.y_max = float(symmetric_y[-1])
        self.truncated = True
        logger.warning(f"Tabulated kernel support truncated to [-{self.y_max}, {self.y_max}]")

        self._build_quadrature()
        _, _, variance = self._hamiltonian(np.zeros(1))
        if not variance[0] > 0:
            raise ValueError("Tabulated kernel must have positive variance")

    def parameters(self) -> Dict[str, Any]:
        return {"nodes": self.raw_nodes.tolist(), "truncated": self.truncated}

    def _density(self, y: np.ndarray) -> np.ndarray:
        return np.interp(y, self.y_nodes, self.g_nodes, left=0.0, right=0.0)

    def _build_quadrature(self) -> None:
        """Refine Simpson panels until the normalization and H(alpha_max) settle."""
        panels = max(2, 2 * ((SIMPSON_INITIAL_NODES // max(len(self.y_nodes) - 1, 1)) // 2))
        ends = np.array([0.0, self.alpha_max])
        previous = None
        while True:
            y, w = _simpson_rule(self.y_nodes, panels)
            self._quad_y = y
            self._quad_w = w * self._density(y)
            mass = float(np.sum(self._quad_w))
            h, _, _ = self._hamiltonian(ends)
            current = np.array([mass, h[1]])
            if previous is not None:
                change = np.abs(current - previous) / np.maximum(np.abs(current), 1.0)
                if np.all(change < NORMALIZATION_TOL):
                    break
            if len(y) * 2 > SIMPSON_MAX_NODES:
                logger.warning(f"Tabulated kernel quadrature stopped at {len(y)} nodes before settling")
                break
            previous = current
            panels *= 2
        if abs(mass - 1.0) > NORMALIZATION_TOL:
            logger.debug(f"Renormalizing tabulated kernel quadrature mass {mass!r}")
            self._quad_w = self._quad_w / mass
        logger.debug(f"Tabulated kernel quadrature uses {len(self._quad_y)} nodes")

        cdf = cumulative_trapezoid(self._density(y), y, initial=0.0)
        self._cdf_y = y
        self._cdf = cdf / cdf[-1]

    def _hamiltonian(self, alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        y = self._quad_y
        w = self._quad_w
        h = np.empty_like(alpha)
        h_prime = np.empty_like(alpha)
        h_second = np.empty_like(alpha)
        flat = alpha.reshape(-1)
        for start in range(0, flat.size, _CHUNK):
            block = flat[start : start + _CHUNK]
            with np.errstate(over="ignore"):
                growth = np.exp(np.outer(block, y)) * w
                excess = np.expm1(np.outer(block, y)) * w
            h.reshape(-1)[start : start + _CHUNK] = excess.sum(axis=1)
            h_prime.reshape(-1)[start : start + _CHUNK] = growth @ y
            h_second.reshape(-1)[start : start + _CHUNK] = growth @ (y * y)
        return h, h_prime, h_second

    def sample_jumps(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.interp(rng.random(size), self._cdf, self._cdf_y)
