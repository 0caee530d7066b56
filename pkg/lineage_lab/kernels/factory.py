"""
Factory function for creating mutation kernels.
"""

import logging
from typing import Any, Dict, Optional

from ..utils.constants import KERNEL_ALIASES, KERNEL_CONFIG
from .base import BaseMutationKernel
from .gaussian import GaussianKernel
from .tabulated import TabulatedKernel
from .two_sided_exponential import TwoSidedExponentialKernel

logger = logging.getLogger(__name__)

_NUMERIC_KEYS = ("alpha_max", "newton_tol", "newton_max_iter", "quadrature_order")

_CLASSES = {
    "GaussianKernel": GaussianKernel,
    "TwoSidedExponentialKernel": TwoSidedExponentialKernel,
    "TabulatedKernel": TabulatedKernel,
}


def create_mutation_kernel(
    kind: Optional[str] = None, config: Optional[Dict[str, Any]] = None
) -> BaseMutationKernel:
    """
    Create a mutation kernel from a kind name and a parameter mapping.

    Args:
        kind: Kernel kind (gaussian, two_sided_exponential, tabulated or an alias).
            If None, read from config["kind"], defaulting to gaussian.
        config: Kernel parameters, e.g. {"sigma": 1.0, "alpha_max": 20}. Keys follow
            the ``kernel`` section of the experiment config; ``lambda`` is accepted
            for the two-sided exponential rate.

    Returns:
        An instance of BaseMutationKernel.
    """
    config = dict(config or {})
    kind = (kind or config.pop("kind", None) or "gaussian").lower()
    config.pop("kind", None)
    kind = KERNEL_ALIASES.get(kind, kind)

    if kind not in KERNEL_CONFIG:
        raise ValueError(f"Unsupported kernel kind: {kind}")

    kernel_config = KERNEL_CONFIG[kind]
    if "lambda" in config:
        config["lam"] = config.pop("lambda")

    kwargs = {key: config.pop(key) for key in _NUMERIC_KEYS if config.get(key) is not None}
    for key in _NUMERIC_KEYS:
        config.pop(key, None)
    for parameter in kernel_config["parameters"]:
        if parameter in config and config[parameter] is not None:
            kwargs[parameter] = config.pop(parameter)
    # Unset parameters of other kinds are harmless (a config section lists all of them)
    leftovers = {key: value for key, value in config.items() if value is not None}
    if leftovers:
        raise ValueError(f"Unexpected parameters for {kind} kernel: {sorted(leftovers)}")

    kernel_class = _CLASSES[kernel_config["class_name"]]
    kernel = kernel_class(**kwargs)
    logger.debug(f"Created mutation kernel {kernel!r}")
    return kernel
