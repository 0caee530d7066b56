"""
Scenario: demographic rates, initial exponent profile and mutation kernel.
"""

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Tuple

import numpy as np
from scipy.integrate import quad

from lineage_lab.kernels.base import BaseMutationKernel
from lineage_lab.utils.constants import DEFAULT_TAIL_TOL, TRUNCATION_REFERENCE_K

from .rates import RateFunction, TentsRate, sample_points

logger = logging.getLogger(__name__)


class ScenarioError(ValueError):
    """Raised for scenarios that cannot be used at all."""


class Rates(NamedTuple):
    b: Any
    d: Any
    p: Any
    big_r: Any
    lambda_total: Any


@dataclass(frozen=True)
class ScenarioBounds:
    """Constants of the standing assumptions.

    0 <= b <= b_bar, p_low <= p <= p_bar, R <= r_bar and
    beta0(x) <= beta_bar - decay_alpha |x| on the working domain.
    """

    b_bar: float
    p_bar: float
    p_low: float
    r_bar: float
    beta_bar: float
    decay_alpha: float

    def __post_init__(self):
        if not self.p_low > 0:
            raise ScenarioError(f"p_low must be positive, got {self.p_low}")
        if self.p_bar < self.p_low:
            raise ScenarioError(f"p_bar={self.p_bar} is below p_low={self.p_low}")


@dataclass(frozen=True)
class Violation:
    """A failed standing assumption, with the worst offending point."""

    assumption: str
    x: float
    values: Dict[str, float]
    n_points: int

    def __str__(self) -> str:
        shown = ", ".join(f"{k}={v:.6g}" for k, v in self.values.items())
        return f"{self.assumption} at x={self.x:.6g} ({shown}; {self.n_points} sampled points fail)"


@dataclass(frozen=True)
class Scenario:
    """Full model specification.

    Attributes:
        name: Identifier used in reports.
        birth: b(x), clonal birth rate.
        death: d(x).
        mutation_rate: p(x), rate of mutant births.
        beta0: Initial exponent profile; the initial population has intensity K^{beta0(x)} dx.
        kernel: Mutation kernel G.
        bounds: Constants of the standing assumptions.
        domain: Working domain of traits.
        beta0_k_offset: Constant shift mu; the initial intensity uses beta0 - mu.
        clamp_radius: Radius beyond which a rate is clamped, if any (recorded for reports).
    """

    name: str
    birth: RateFunction
    death: RateFunction
    mutation_rate: RateFunction
    beta0: RateFunction
    kernel: BaseMutationKernel
    bounds: ScenarioBounds
    domain: Tuple[float, float]
    beta0_k_offset: float = 0.0
    clamp_radius: Optional[float] = None
    notes: Dict[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        if not self.domain[0] < self.domain[1]:
            raise ScenarioError(f"Empty working domain {self.domain}")

    def growth_rate(self, x):
        """R(x) = b(x) + p(x) - d(x)."""
        return self.birth(x) + self.mutation_rate(x) - self.death(x)

    def total_rate(self, x):
        """Lambda(x) = b(x) + p(x) + d(x)."""
        return self.birth(x) + self.mutation_rate(x) + self.death(x)

    def initial_exponent(self, x):
        """beta0(x) shifted by the offset."""
        return self.beta0(x) - self.beta0_k_offset

    def rates_at(self, x) -> Rates:
        """Demographic rates at a trait (or array of traits)."""
        b = self.birth(x)
        d = self.death(x)
        p = self.mutation_rate(x)
        return Rates(b=b, d=d, p=p, big_r=b + p - d, lambda_total=b + p + d)

    def describe(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "birth": self.birth.describe(),
            "death": self.death.describe(),
            "mutation_rate": self.mutation_rate.describe(),
            "beta0": self.beta0.describe(),
            "kernel": self.kernel.describe(),
            "bounds": {
                "b_bar": self.bounds.b_bar,
                "p_bar": self.bounds.p_bar,
                "p_low": self.bounds.p_low,
                "r_bar": self.bounds.r_bar,
                "beta_bar": self.bounds.beta_bar,
                "decay_alpha": self.bounds.decay_alpha,
            },
            "domain": list(self.domain),
            "beta0_k_offset": self.beta0_k_offset,
            "clamp_radius": self.clamp_radius,
        }

    @property
    def scenario_hash(self) -> str:
        payload = json.dumps(self.describe(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def side_caps(self) -> Tuple[float, float]:
        """Constants (left, right) with beta0 - mu <= cap - decay_alpha |x| on each half-line."""
        decay = self.bounds.decay_alpha
        if isinstance(self.beta0, TentsRate):
            try:
                left, right = self.beta0.side_caps(decay)
                return left - self.beta0_k_offset, right - self.beta0_k_offset
            except ValueError:
                pass
        cap = self.bounds.beta_bar - self.beta0_k_offset
        return cap, cap

    def validate(self, domain: Optional[Tuple[float, float]] = None, n_samples: int = 10_000) -> List[Violation]:
        """
        Check the standing assumptions at equispaced points.

        Args:
            domain: Interval to sample; defaults to the scenario's working domain.
            n_samples: Number of points, at least 2.

        Returns:
            Violations, one per failed assumption (worst point). Empty iff all hold.
        """
        if n_samples < 2:
            raise ValueError(f"validate needs n_samples >= 2, got {n_samples}")
        x = sample_points(domain or self.domain, n_samples)
        rates = self.rates_at(x)
        bounds = self.bounds
        beta = self.beta0(x)
        envelope = bounds.beta_bar - bounds.decay_alpha * np.abs(x)

        checks = [
            ("b negative", -rates.b, {"b": rates.b}),
            ("b above b̄", rates.b - bounds.b_bar, {"b": rates.b, "b_bar": bounds.b_bar}),
            ("d negative", -rates.d, {"d": rates.d}),
            ("p below p̲", bounds.p_low - rates.p, {"p": rates.p, "p_low": bounds.p_low}),
            ("p above p̄", rates.p - bounds.p_bar, {"p": rates.p, "p_bar": bounds.p_bar}),
            ("R above R̄", rates.big_r - bounds.r_bar, {"R": rates.big_r, "r_bar": bounds.r_bar}),
            ("β0 lacks linear decay", beta - envelope, {"beta0": beta, "envelope": envelope}),
        ]
        violations = []
        for assumption, excess, values in checks:
            failing = excess > 1e-12
            if not np.any(failing):
                continue
            worst = int(np.argmax(excess))
            shown = {k: float(np.broadcast_to(v, x.shape)[worst]) for k, v in values.items()}
            violations.append(Violation(assumption, float(x[worst]), shown, int(np.sum(failing))))
        if bounds.decay_alpha <= 0:
            violations.append(
                Violation("decay_alpha not positive", 0.0, {"decay_alpha": bounds.decay_alpha}, 0)
            )
        for violation in violations:
            logger.warning(f"Scenario {self.name}: {violation}")
        return violations

    def initial_mass(self, K: float, interval: Optional[Tuple[float, float]] = None) -> float:
        """M = ∫ K^{beta0(x) - mu} dx over an interval (default: a wide tail-safe interval)."""
        log_k = math.log(K)
        if interval is None:
            interval = self._wide_interval(K)
        lo, hi = interval
        points = [p for p in self.beta0.breakpoints() if lo < p < hi]

        def intensity(x):
            return math.exp(log_k * self.initial_exponent(x))

        total, _ = quad(intensity, lo, hi, points=points or None, limit=500, epsabs=0.0, epsrel=1e-10)
        return float(total)

    def _wide_interval(self, K: float) -> Tuple[float, float]:
        # Beyond cap/alpha + 40/(alpha ln K) + 1 the intensity is below e^-40 K^-alpha
        decay = self.bounds.decay_alpha
        log_k = math.log(K)
        left, right = self.side_caps()
        pad = 40.0 / (decay * log_k) + 1.0
        return -(max(left, 0.0) / decay + pad), max(right, 0.0) / decay + pad

    def _tail_radius(self, cap: float, K: float, tail_tol: float) -> float:
        decay = self.bounds.decay_alpha
        log_k = math.log(K)
        mass = self.initial_mass(K)
        budget = 0.5 * tail_tol * mass * decay * log_k
        if budget <= 0:
            return self._wide_interval(K)[1]
        return max((cap * log_k - math.log(budget)) / (decay * log_k), 0.0)

    def truncation_interval(
        self,
        K: float,
        tail_tol: float = DEFAULT_TAIL_TOL,
        reference_k: Optional[float] = TRUNCATION_REFERENCE_K,
    ) -> Tuple[float, float]:
        """
        Interval outside which the initial intensity carries a negligible share of mass.

        Each side X satisfies K^{cap - decay X} / (decay ln K) <= tail_tol M / 2, the
        closed-form tail of the envelope beta0 <= cap - decay |x|. The tail criterion
        shrinks as K grows, so each side is the larger of its radius at K and at
        ``reference_k``; the interval is then nondecreasing in K and in 1/tail_tol.

        Args:
            K: Population scale, at least 2.
            tail_tol: Relative tail mass, positive.
            reference_k: Smallest K the interval must also cover; None disables the hull.

        Returns:
            (x_min, x_max).
        """
        if K < 2:
            raise ValueError(f"truncation_interval needs K >= 2, got {K}")
        if not tail_tol > 0:
            raise ValueError(f"tail_tol must be positive, got {tail_tol}")
        if not self.bounds.decay_alpha > 0:
            raise ScenarioError(f"decay_alpha must be positive, got {self.bounds.decay_alpha}")
        left_cap, right_cap = self.side_caps()
        scales = [K] if reference_k is None or reference_k >= K else [K, reference_k]
        left = max(self._tail_radius(left_cap, k, tail_tol) for k in scales)
        right = max(self._tail_radius(right_cap, k, tail_tol) for k in scales)
        return -left, right

    def working_domain(
        self, T: float, v_max: float, K: float, tail_tol: float = DEFAULT_TAIL_TOL
    ) -> Tuple[float, float]:
        """Truncation interval padded by the largest excursion v_max T."""
        lo, hi = self.truncation_interval(K, tail_tol)
        return lo - v_max * T, hi + v_max * T
