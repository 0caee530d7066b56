"""
Built-in benchmark scenarios.

constant-supercritical
    b=1, d=0.5, p=0.5, beta0(x)=1-|x|. Constant R=1, so u_0(t,0)=1+t with the
    stay-put path optimal.
quadratic
    b=1, d(x)=0.5+x^2 clamped at |x|=5 (d <= 25.5), p=0.5, so R(x)=1-x^2;
    beta0(x)=0.8-|x+1|. Smooth fitness peak at 0 with mass starting off-peak, so
    optimal trajectories drift toward the peak.
valley
    b=1, p=0.5, R=0.8 outside a lethal well R=-0.5 on |x|<1 (corners smoothed over
    width 0.1). beta0(x)=max(0.5-2|x+2|, -0.4-2|x-2|): the bulk sits left of the well
    and a faint seed of negative exponent sits right of it. The seed has no
    individuals at large K, so the constrained value at x=+2 is masked up to
    t~2.5 while the unconstrained value grows it to 0.8 by t=1.5.
"""

from typing import Callable, Dict, Optional

from lineage_lab.kernels.base import BaseMutationKernel
from lineage_lab.kernels.gaussian import GaussianKernel

from .rates import ConstantRate, PolynomialRate, TentsRate, WellRate, tent
from .scenario import Scenario, ScenarioBounds


def constant_supercritical(kernel: Optional[BaseMutationKernel] = None) -> Scenario:
    return Scenario(
        name="constant-supercritical",
        birth=ConstantRate(1.0),
        death=ConstantRate(0.5),
        mutation_rate=ConstantRate(0.5),
        beta0=tent(1.0, 1.0),
        kernel=kernel or GaussianKernel(sigma=1.0),
        bounds=ScenarioBounds(b_bar=1.0, p_bar=0.5, p_low=0.5, r_bar=1.0, beta_bar=1.0, decay_alpha=1.0),
        domain=(-8.0, 8.0),
    )


def quadratic(kernel: Optional[BaseMutationKernel] = None) -> Scenario:
    return Scenario(
        name="quadratic",
        birth=ConstantRate(1.0),
        death=PolynomialRate((0.5, 0.0, 1.0), clamp_radius=5.0),
        mutation_rate=ConstantRate(0.5),
        beta0=tent(0.8, 1.0, -1.0),
        kernel=kernel or GaussianKernel(sigma=1.0),
        bounds=ScenarioBounds(b_bar=1.0, p_bar=0.5, p_low=0.5, r_bar=1.0, beta_bar=1.8, decay_alpha=1.0),
        domain=(-5.0, 5.0),
        clamp_radius=5.0,
    )


def valley(kernel: Optional[BaseMutationKernel] = None) -> Scenario:
    # d = b + p - R, so R = 0.8 outside and -0.5 inside the well
    return Scenario(
        name="valley",
        birth=ConstantRate(1.0),
        death=WellRate(outer=0.7, inner=2.0, half_width=1.0, width=0.1),
        mutation_rate=ConstantRate(0.5),
        beta0=TentsRate(((0.5, 2.0, -2.0), (-0.4, 2.0, 2.0))),
        kernel=kernel or GaussianKernel(sigma=1.0),
        bounds=ScenarioBounds(b_bar=1.0, p_bar=0.5, p_low=0.5, r_bar=0.8, beta_bar=4.5, decay_alpha=2.0),
        domain=(-6.0, 6.0),
    )


BUILTIN_SCENARIOS: Dict[str, Callable[..., Scenario]] = {
    "constant-supercritical": constant_supercritical,
    "quadratic": quadratic,
    "valley": valley,
}


def get_builtin(name: str, kernel: Optional[BaseMutationKernel] = None) -> Scenario:
    """Instantiate a built-in scenario by name, optionally with another kernel."""
    if name not in BUILTIN_SCENARIOS:
        raise ValueError(f"Unknown built-in scenario: {name} (known: {sorted(BUILTIN_SCENARIOS)})")
    return BUILTIN_SCENARIOS[name](kernel)
