"""
Two-sided exponential (Laplace) mutation kernel.
"""

from typing import Any, Dict, Optional, Tuple

import numpy as np

from .base import BaseMutationKernel


class TwoSidedExponentialKernel(BaseMutationKernel):
    """Density G(y) = (lam / 2) exp(-lam |y|).

    Exponential moments exist only for |alpha| < lam, so alpha_max must stay below lam.
    """

    kind = "two_sided_exponential"

    def __init__(self, lam: float = 5.0, alpha_max: Optional[float] = None, **kwargs):
        if not lam > 1:
            raise ValueError(f"Two-sided exponential kernel requires lam > 1, got {lam}")
        if alpha_max is None:
            alpha_max = 0.95 * lam
        if alpha_max >= lam:
            raise ValueError(
                f"alpha_max={alpha_max} must be smaller than lam={lam}: "
                "the exponential moment diverges at |alpha| >= lam"
            )
        super().__init__(alpha_max=alpha_max, **kwargs)
        self.lam = float(lam)

    def parameters(self) -> Dict[str, Any]:
        return {"lam": self.lam}

    def _hamiltonian(self, alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        l2 = self.lam**2
        gap = l2 - alpha**2
        h = alpha**2 / gap
        h_prime = 2.0 * alpha * l2 / gap**2
        h_second = 2.0 * l2 / gap**2 + 8.0 * alpha**2 * l2 / gap**3
        return h, h_prime, h_second

    def sample_jumps(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.laplace(0.0, 1.0 / self.lam, size)
