"""Special functions and densities: Gamma, lambda, delta_k, F_k, prime sums, Dickman rho."""

from .densities import (
    DEFAULT_PRIME_CUTOFF,
    DensityParams,
    LambdaValue,
    F_k,
    bigQ,
    delta_k,
    euler_product,
    euler_tail_bound,
    gamma,
    lambda_fn,
    lambda_real,
    rgamma,
)
from .dickman import (
    DickmanTable,
    dickman_asymptotic_check,
    dickman_build,
    dickman_r,
    identity_residuals,
    write_grid_csv,
)
from .primesums import E_x, mertens_sums, restricted_prime_sum

__all__ = [
    "DEFAULT_PRIME_CUTOFF", "DensityParams", "LambdaValue", "F_k", "bigQ", "delta_k",
    "euler_product", "euler_tail_bound", "gamma", "lambda_fn", "lambda_real", "rgamma",
    "DickmanTable", "dickman_asymptotic_check", "dickman_build", "dickman_r",
    "identity_residuals", "write_grid_csv", "E_x", "mertens_sums", "restricted_prime_sum",
]
