"""
Spine process and Monte-Carlo estimation of expected counts.

The spine jumps at rate p(x) ln K in rescaled time, by y / ln K with y drawn
from the mutation kernel. Expected counts follow from the many-to-one formula

    E N_t^A = ∫ K^{beta0(x) - mu} E_x[K^{∫_0^t R(Y_s) ds} 1{Y in A}] dx,

with the outer integral sampled on equal-mass strata of the initial intensity
and weights combined in log space.
"""

import logging
import math
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from lineage_lab.functional.paths import GridPath, Interpolation, sup_distance
from lineage_lab.scenario.scenario import Scenario
from lineage_lab.utils.constants import DEFAULT_TAIL_TOL
from lineage_lab.utils.sentinel import NEG_INF, Extended

from .initial import initial_profile

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SpineSample:
    """One spine path.

    Attributes:
        start: Initial trait.
        path: Piecewise-constant path in rescaled time.
        weight_exponent: ∫_0^t R(Y_s) ds; the weight is K^{weight_exponent}.
    """

    start: float
    path: GridPath
    weight_exponent: float


def simulate_spine(s: Scenario, K: float, t: float, x0: float, rng: np.random.Generator) -> SpineSample:
    """Simulate the spine exactly on [0, t] from x0."""
    if K < 2:
        raise ValueError(f"K must be at least 2, got {K}")
    if t < 0:
        raise ValueError(f"Horizon must be nonnegative, got {t}")
    log_k = math.log(K)
    now = 0.0
    x = float(x0)
    times = [0.0]
    values = [x]
    weight = 0.0
    while True:
        rate = s.mutation_rate(x) * log_k
        wait = rng.standard_exponential() / rate if rate > 0 else math.inf
        if now + wait >= t:
            weight += s.growth_rate(x) * (t - now)
            break
        weight += s.growth_rate(x) * wait
        now += wait
        x += s.kernel.sample_jump(rng) / log_k
        times.append(now)
        values.append(x)
    if t > times[-1]:
        times.append(t)
        values.append(x)
    path = GridPath(np.array(times), np.array(values), Interpolation.PIECEWISE_CONSTANT)
    return SpineSample(start=float(x0), path=path, weight_exponent=float(weight))


class PathPredicate(ABC):
    """Membership test on spine paths."""

    spec: str = "base"

    @abstractmethod
    def __call__(self, path: GridPath) -> bool:
        """Whether the path belongs to the set."""


class Always(PathPredicate):
    spec = "always"

    def __call__(self, path: GridPath) -> bool:
        return True


class Never(PathPredicate):
    spec = "never"

    def __call__(self, path: GridPath) -> bool:
        return False


class Window(PathPredicate):
    """Terminal value in [x - delta, x + delta]."""

    def __init__(self, x: float, delta: float):
        if not delta > 0:
            raise ValueError(f"Window half-width must be positive, got {delta}")
        self.x = float(x)
        self.delta = float(delta)
        self.spec = f"window(x={self.x:g},delta={self.delta:g})"

    def __call__(self, path: GridPath) -> bool:
        return abs(float(path.values[-1]) - self.x) <= self.delta


class Tube(PathPredicate):
    """Whole path within sup-distance eps of a reference path."""

    def __init__(self, reference: GridPath, eps: float, name: str = "f"):
        if not eps > 0:
            raise ValueError(f"Tube radius must be positive, got {eps}")
        self.reference = reference
        self.eps = float(eps)
        self.spec = f"tube({name},eps={self.eps:g})"

    def __call__(self, path: GridPath) -> bool:
        return sup_distance(path, self.reference) <= self.eps


@dataclass(frozen=True)
class MeanCountEstimate:
    """Estimate of E N_t^A.

    Attributes:
        estimate: Point estimate.
        std_error: Standard error of the estimate.
        log_estimate: ln(estimate) / ln K, NEG_INF when degenerate.
        degenerate: True when no spine satisfied the predicate.
        n_spines: Number of spines.
        hits: Spines satisfying the predicate.
        mass: Initial mass M on the truncation interval.
    """

    estimate: float
    std_error: float
    log_estimate: Extended
    degenerate: bool
    n_spines: int
    hits: int
    mass: float


def estimate_mean_count(
    s: Scenario,
    K: float,
    t: float,
    predicate: Callable[[GridPath], bool],
    n_spines: int,
    rng: np.random.Generator,
    tail_tol: float = DEFAULT_TAIL_TOL,
) -> MeanCountEstimate:
    """
    Estimate the expected number of individuals whose lineage satisfies a predicate.

    Args:
        s: Scenario.
        K: Population scale, at least 2.
        t: Rescaled horizon.
        predicate: Test on spine paths (see Always, Never, Window, Tube).
        n_spines: Number of spines, at least 2; one start point per equal-mass stratum.
        rng: Random stream.
        tail_tol: Relative tail mass dropped by the truncation interval.

    Returns:
        MeanCountEstimate; degenerate estimates are (0, 0) with the flag set.
    """
    if n_spines < 2:
        raise ValueError(f"estimate_mean_count needs n_spines >= 2, got {n_spines}")
    start_time = time.time()
    log_k = math.log(K)
    profile = initial_profile(s, K, tail_tol)
    starts = profile.stratified(n_spines, rng)

    log_values = np.full(n_spines, -np.inf)
    for i, x0 in enumerate(starts):
        spine = simulate_spine(s, K, t, float(x0), rng)
        if predicate(spine.path):
            log_values[i] = spine.weight_exponent * log_k
    hits = int(np.count_nonzero(np.isfinite(log_values)))
    spec = getattr(predicate, "spec", repr(predicate))
    if hits == 0:
        logger.info(f"Spine estimate for {spec} at K={K:g} is degenerate: no spine satisfied the predicate")
        return MeanCountEstimate(0.0, 0.0, NEG_INF, True, n_spines, 0, profile.mass)

    log_mean = float(logsumexp(log_values)) - math.log(n_spines)
    peak = float(np.max(log_values))
    scaled = np.exp(log_values - peak)
    spread = math.sqrt(float(np.var(scaled, ddof=1)) / n_spines)
    log_estimate = math.log(profile.mass) + log_mean
    estimate = math.exp(log_estimate)
    std_error = profile.mass * math.exp(peak) * spread
    logger.info(
        f"Spine estimate for {spec} at K={K:g}, t={t}: {estimate:.6g} ± {std_error:.3g} "
        f"({hits}/{n_spines} hits) in {time.time() - start_time:.2f} seconds"
    )
    return MeanCountEstimate(
        estimate=estimate,
        std_error=std_error,
        log_estimate=log_estimate / log_k,
        degenerate=False,
        n_spines=n_spines,
        hits=hits,
        mass=profile.mass,
    )
