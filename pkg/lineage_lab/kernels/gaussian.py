"""
Gaussian mutation kernel.
"""

from typing import Any, Dict, Tuple

import numpy as np

from .base import BaseMutationKernel


class GaussianKernel(BaseMutationKernel):
    """Centered normal density with standard deviation sigma.

    Moments are closed-form: H(alpha) = exp(sigma^2 alpha^2 / 2) - 1.
    """

    kind = "gaussian"

    def __init__(self, sigma: float = 1.0, **kwargs):
        super().__init__(**kwargs)
        if not sigma > 0:
            raise ValueError(f"Gaussian kernel requires sigma > 0, got {sigma}")
        self.sigma = float(sigma)

    def parameters(self) -> Dict[str, Any]:
        return {"sigma": self.sigma}

    def _hamiltonian(self, alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        s2 = self.sigma**2
        exponent = 0.5 * s2 * alpha**2
        with np.errstate(over="ignore"):
            moment = np.exp(exponent)
            h = np.expm1(exponent)
            h_prime = s2 * alpha * moment
            h_second = (s2 + s2 * s2 * alpha**2) * moment
        return h, h_prime, h_second

    def quadrature_moments(self, alpha: float) -> Tuple[float, float, float]:
        """H, H', H'' by Gauss-Hermite quadrature of order ``quadrature_order``.

        Independent of the closed form; used to cross-check it.
        """
        nodes, weights = np.polynomial.hermite_e.hermegauss(self.quadrature_order)
        weights = weights / np.sqrt(2.0 * np.pi)
        y = self.sigma * nodes
        growth = np.exp(alpha * y)
        m0 = float(np.dot(weights, growth))
        m1 = float(np.dot(weights, y * growth))
        m2 = float(np.dot(weights, y * y * growth))
        return m0 - 1.0, m1, m2

    def sample_jumps(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return self.sigma * rng.standard_normal(size)
