"""
Mutation kernels for lineage-lab.
This module contains the mutation densities G with a common interface for H, its
derivatives, the Lagrangian and jump sampling.
"""

from .base import (
    BaseMutationKernel,
    KernelConvergenceError,
    KernelDomainError,
    KernelSaturationError,
)
from .factory import create_mutation_kernel
from .gaussian import GaussianKernel
from .tabulated import TabulatedKernel
from .two_sided_exponential import TwoSidedExponentialKernel

__all__ = [
    "BaseMutationKernel",
    "GaussianKernel",
    "TabulatedKernel",
    "TwoSidedExponentialKernel",
    "KernelConvergenceError",
    "KernelDomainError",
    "KernelSaturationError",
    "create_mutation_kernel",
]
