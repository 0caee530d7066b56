"""
Poisson initial condition with intensity K^{beta0(x) - mu} dx.
"""

import logging
import math
from functools import lru_cache
from typing import Optional, Tuple

import numpy as np
from scipy.integrate import cumulative_trapezoid

from lineage_lab.scenario.scenario import Scenario
from lineage_lab.utils.constants import DEFAULT_TAIL_TOL, INITIAL_CDF_NODES, POPULATION_CAP

logger = logging.getLogger(__name__)


class PopulationCapError(RuntimeError):
    """Raised when the expected initial population exceeds the population cap."""


class InitialProfile:
    """
    Truncated initial intensity of one scenario at one K.

    Holds the mass M on the truncation interval and an inverse CDF tabulated on
    INITIAL_CDF_NODES equispaced nodes, shared by the branching simulation and
    the stratified start points of the spine estimator.
    """

    def __init__(self, scenario: Scenario, K: float, tail_tol: float = DEFAULT_TAIL_TOL):
        if K < 2:
            raise ValueError(f"Initial condition needs K >= 2, got {K}")
        self.scenario = scenario
        self.K = float(K)
        self.log_k = math.log(K)
        self.interval: Tuple[float, float] = scenario.truncation_interval(K, tail_tol)
        self.mass = scenario.initial_mass(K, self.interval)

        nodes = np.linspace(self.interval[0], self.interval[1], INITIAL_CDF_NODES)
        exponents = self.log_k * np.asarray(scenario.initial_exponent(nodes), dtype=float)
        density = np.exp(exponents - np.max(exponents))
        cdf = cumulative_trapezoid(density, nodes, initial=0.0)
        self._nodes = nodes
        self._cdf = cdf / cdf[-1]
        logger.debug(
            f"Initial profile for {scenario.name} at K={K}: mass {self.mass:.6g} on "
            f"[{self.interval[0]:.4f}, {self.interval[1]:.4f}]"
        )

    def quantile(self, u: np.ndarray) -> np.ndarray:
        """Inverse CDF with linear interpolation."""
        return np.interp(u, self._cdf, self._nodes)

    def sample(self, rng: np.random.Generator, cap: Optional[int] = POPULATION_CAP) -> np.ndarray:
        """Draw N_0 ~ Poisson(M) traits, i.i.d. with density proportional to the intensity.

        Raises:
            PopulationCapError: If M exceeds cap.
        """
        if cap is not None and self.mass > cap:
            raise PopulationCapError(
                f"Expected initial population {self.mass:.6g} exceeds the cap {cap} "
                f"for scenario {self.scenario.name} at K={self.K:g}"
            )
        count = int(rng.poisson(self.mass))
        return self.quantile(rng.random(count))

    def stratified(self, n: int, rng: np.random.Generator) -> np.ndarray:
        """One start point in each of n equal-mass strata."""
        if n < 1:
            raise ValueError(f"Need at least one stratum, got {n}")
        return self.quantile((np.arange(n) + rng.random(n)) / n)


@lru_cache(maxsize=32)
def initial_profile(scenario: Scenario, K: float, tail_tol: float = DEFAULT_TAIL_TOL) -> InitialProfile:
    """Cached InitialProfile (scenarios are immutable)."""
    return InitialProfile(scenario, K, tail_tol)


def sample_initial(
    s: Scenario,
    K: float,
    rng: np.random.Generator,
    cap: Optional[int] = POPULATION_CAP,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> np.ndarray:
    """
    Sample the initial traits of the population.

    Args:
        s: Scenario.
        K: Population scale, at least 2.
        rng: Random stream.
        cap: Largest admissible expected population; None disables the check.
        tail_tol: Relative tail mass dropped by the truncation interval.

    Returns:
        Array of N_0 traits in sampling order.
    """
    return initial_profile(s, K, tail_tol).sample(rng, cap)
