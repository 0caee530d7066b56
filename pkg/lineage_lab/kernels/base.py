"""
Base mutation kernel class that defines the interface for all kernels.
"""

import logging
from abc import ABC, abstractmethod
from typing import Any, Dict, Tuple, Union

import numpy as np

from lineage_lab.utils.constants import ALPHA_MAX, NEWTON_MAX_ITER, NEWTON_TOL, SATURATION_LIMIT

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


class KernelDomainError(ValueError):
    """Raised when |alpha| exceeds the kernel's alpha_max."""


class KernelSaturationError(ArithmeticError):
    """Raised when an exponential moment overflows instead of returning infinity."""


class KernelConvergenceError(RuntimeError):
    """Raised when the inversion of H' does not converge. Carries the last bracket."""

    def __init__(self, message: str, bracket: Tuple[np.ndarray, np.ndarray]):
        super().__init__(message)
        self.bracket = bracket


class BaseMutationKernel(ABC):
    """Base class for even mutation densities G with all exponential moments.

    Subclasses provide H, H' and H'' for nonnegative alpha and a sampler. Oddness
    of H' and evenness of H are applied here, so every kernel satisfies them exactly.
    """

    kind: str = "base"

    def __init__(
        self,
        alpha_max: float = ALPHA_MAX,
        newton_tol: float = NEWTON_TOL,
        newton_max_iter: int = NEWTON_MAX_ITER,
        quadrature_order: int = 64,
    ):
        if alpha_max <= 0:
            raise ValueError(f"alpha_max must be positive, got {alpha_max}")
        if newton_tol <= 0:
            raise ValueError(f"newton_tol must be positive, got {newton_tol}")
        if newton_max_iter < 1:
            raise ValueError(f"newton_max_iter must be a positive integer, got {newton_max_iter}")
        if quadrature_order < 1:
            raise ValueError(f"quadrature_order must be a positive integer, got {quadrature_order}")
        self.alpha_max = float(alpha_max)
        self.newton_tol = float(newton_tol)
        self.newton_max_iter = int(newton_max_iter)
        self.quadrature_order = int(quadrature_order)

    @abstractmethod
    def _hamiltonian(self, alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        """H, H', H'' at nonnegative alpha (no domain checks)."""

    @abstractmethod
    def sample_jumps(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` independent jumps from G."""

    @abstractmethod
    def parameters(self) -> Dict[str, Any]:
        """Kernel parameters for reports and hashing."""

    def describe(self) -> Dict[str, Any]:
        """Kind, parameters and numerical settings."""
        return {
            "kind": self.kind,
            **self.parameters(),
            "alpha_max": self.alpha_max,
            "newton_tol": self.newton_tol,
            "newton_max_iter": self.newton_max_iter,
            "quadrature_order": self.quadrature_order,
        }

    def __repr__(self) -> str:
        params = ", ".join(f"{k}={v}" for k, v in self.parameters().items() if k != "nodes")
        return f"{type(self).__name__}({params}, alpha_max={self.alpha_max})"

    def _evaluate(self, alpha: np.ndarray) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        magnitude = np.abs(alpha)
        h, h_prime, h_second = self._hamiltonian(magnitude)
        with np.errstate(invalid="ignore"):
            saturated = ~np.isfinite(h_prime) | (np.abs(h_prime) > SATURATION_LIMIT)
            saturated |= ~np.isfinite(h) | (h > SATURATION_LIMIT)
            saturated |= ~np.isfinite(h_second) | (h_second > SATURATION_LIMIT)
        if np.any(saturated):
            worst = float(np.max(magnitude[saturated]))
            raise KernelSaturationError(
                f"Exponential moment of {self.kind} kernel overflows at |alpha|={worst}"
            )
        return h, np.sign(alpha) * h_prime, h_second

    def h_value(self, alpha: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike]:
        """Evaluate H(alpha) = ∫(e^{alpha y} - 1) G(y) dy and its first two derivatives.

        Args:
            alpha: Scalar or array with |alpha| <= alpha_max.

        Returns:
            Tuple (h, h_prime, h_second) with the shape of alpha.

        Raises:
            KernelDomainError: If some |alpha| exceeds alpha_max.
            KernelSaturationError: If a moment overflows.
        """
        scalar = np.ndim(alpha) == 0
        values = np.atleast_1d(np.asarray(alpha, dtype=float))
        if np.any(~np.isfinite(values)) or np.any(np.abs(values) > self.alpha_max):
            worst = float(np.max(np.abs(values)))
            raise KernelDomainError(f"|alpha|={worst} outside [0, alpha_max={self.alpha_max}]")
        h, h_prime, h_second = self._evaluate(values)
        if scalar:
            return float(h[0]), float(h_prime[0]), float(h_second[0])
        return h, h_prime, h_second

    def h_prime_inverse(self, w: ArrayLike) -> ArrayLike:
        """Solve H'(alpha) = w by safeguarded Newton with a doubling bracket.

        H' is odd and strictly increasing, so the sign of the root is the sign of w
        and only |w| needs solving.

        Raises:
            KernelSaturationError: If |w| exceeds H'(alpha_max).
            KernelConvergenceError: If Newton does not converge within newton_max_iter.
        """
        scalar = np.ndim(w) == 0
        target = np.atleast_1d(np.asarray(w, dtype=float))
        if not np.all(np.isfinite(target)):
            raise ValueError("h_prime_inverse requires finite w")
        sign = np.sign(target)
        target = np.abs(target)
        tolerance = self.newton_tol * (1.0 + target)

        # Bracket [lo, hi] with H'(lo) <= |w| <= H'(hi)
        lo = np.zeros_like(target)
        hi = np.full_like(target, min(1.0, self.alpha_max))
        for _ in range(64):
            _, h_prime_hi, _ = self._evaluate(hi)
            short = (h_prime_hi < target) & (hi < self.alpha_max)
            if not np.any(short):
                break
            lo = np.where(short, hi, lo)
            hi = np.where(short, np.minimum(2.0 * hi, self.alpha_max), hi)
        _, h_prime_hi, _ = self._evaluate(hi)
        if np.any(h_prime_hi < target - tolerance):
            worst = float(np.max(target[h_prime_hi < target - tolerance]))
            raise KernelSaturationError(
                f"|w|={worst} exceeds H'(alpha_max) for the {self.kind} kernel"
            )

        _, _, curvature0 = self._evaluate(np.zeros(1))
        alpha = np.clip(target / curvature0[0], lo, hi)
        for iteration in range(self.newton_max_iter):
            _, h_prime, h_second = self._evaluate(alpha)
            residual = h_prime - target
            done = np.abs(residual) <= tolerance
            if np.all(done):
                logger.debug(f"h_prime_inverse converged in {iteration} iterations")
                result = sign * alpha
                return float(result[0]) if scalar else result
            lo = np.where(residual < 0, alpha, lo)
            hi = np.where(residual > 0, alpha, hi)
            step = alpha - residual / h_second
            outside = (step <= lo) | (step >= hi) | ~np.isfinite(step)
            proposal = np.where(outside, 0.5 * (lo + hi), step)
            alpha = np.where(done, alpha, proposal)

        raise KernelConvergenceError(
            f"h_prime_inverse did not converge after {self.newton_max_iter} iterations",
            bracket=(sign * lo, sign * hi),
        )

    def lagrangian(self, p_x: ArrayLike, v: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
        """Legendre transform L(x, v) = sup_alpha (alpha v - p(x) H(alpha)).

        Args:
            p_x: Mutation rate at the trait, strictly positive. Broadcasts with v.
            v: Trait velocity.

        Returns:
            Tuple (l, alpha_star) where alpha_star = (H')^{-1}(v / p_x).
        """
        scalar = np.ndim(p_x) == 0 and np.ndim(v) == 0
        p_arr, v_arr = np.broadcast_arrays(
            np.atleast_1d(np.asarray(p_x, dtype=float)), np.atleast_1d(np.asarray(v, dtype=float))
        )
        if np.any(p_arr <= 0):
            raise ValueError("lagrangian requires p_x > 0")
        alpha_star = self.h_prime_inverse(v_arr / p_arr)
        h, _, _ = self._evaluate(alpha_star)
        value = np.maximum(np.abs(alpha_star * v_arr) - p_arr * h, 0.0)
        if scalar:
            return float(value[0]), float(alpha_star[0])
        return value, alpha_star

    def sample_jump(self, rng: np.random.Generator) -> float:
        """Draw one jump y distributed as G(y) dy."""
        return float(self.sample_jumps(rng, 1)[0])
