"""Desk-scale experiments on integers with a prescribed number of prime factors.

Modules:
    sieve: segmented interval factorisation and exact counting primitives.
    specialfn: Gamma, the Euler-product factor lambda, densities and Dickman rho.
    sset: the structured set S defined by prime windows and subwindows.
    seldel: weighted generating sums and Cauchy-contour recovery of counts.
    dirichletpoly: Dirichlet polynomials, their factorisation and mean values.
    harness: experiment specs, drivers, reports and the command line.
"""

__version__ = "0.1.0"

from .errors import (
    CapacityError,
    CutoffError,
    DegenerateFormsError,
    DomainError,
    InfeasibleConfigError,
    InsufficientPrimesError,
    OmegaLabError,
    PoleError,
    ToleranceError,
)

__all__ = [
    "__version__",
    "CapacityError",
    "CutoffError",
    "DegenerateFormsError",
    "DomainError",
    "InfeasibleConfigError",
    "InsufficientPrimesError",
    "OmegaLabError",
    "PoleError",
    "ToleranceError",
]
