"""Sums over primes and prime powers restricted to a set of primes."""

from __future__ import annotations

import math

import numpy as np

from ..errors import DomainError, InsufficientPrimesError
from ..sieve import ALL_PRIMES, PrimeFilter, PrimeTable, load_primes


def _primes_upto(x, primes: PrimeTable | None) -> np.ndarray:
    bound = int(math.floor(x))
    if primes is None:
        primes = load_primes(max(bound, 2))
    elif primes.limit < bound:
        raise InsufficientPrimesError(f"prime table reaches {primes.limit}, need {bound}")
    return primes.primes[: np.searchsorted(primes.primes, bound, side="right")]


def E_x(x, prime_filter: PrimeFilter = ALL_PRIMES, primes: PrimeTable | None = None) -> float:
    """``E(x) = 1 + sum 1/p`` over primes ``p <= x`` allowed by ``prime_filter``."""
    return 1.0 + restricted_prime_sum(x, 0.0, prime_filter, primes)


def restricted_prime_sum(y, alpha: float, prime_filter: PrimeFilter = ALL_PRIMES,
                         primes: PrimeTable | None = None) -> float:
    """``sum p^(alpha - 1)`` over filtered primes ``p <= y``."""
    if not 0 <= alpha <= 1:
        raise DomainError("alpha must lie in [0, 1]")
    p = _primes_upto(y, primes)
    p = p[prime_filter.mask(p)].astype(np.float64)
    if alpha == 0:
        return math.fsum(1.0 / p)
    return math.fsum(p ** (alpha - 1.0))


def mertens_sums(x, primes: PrimeTable | None = None) -> tuple[float, float]:
    """``(sum 1/p^nu, sum log(p^nu)/p^nu)`` over all prime powers ``p^nu <= x``."""
    bound = int(math.floor(x))
    p = _primes_upto(bound, primes)
    recip = 0.0
    logw = 0.0
    pe = p.copy()
    nu = 1
    logp = np.log(p.astype(np.float64))
    while len(pe):
        inv = 1.0 / pe.astype(np.float64)
        recip += float(np.sum(inv))
        logw += float(np.sum(nu * logp * inv))
        keep = pe <= bound // p
        pe, p, logp = pe[keep] * p[keep], p[keep], logp[keep]
        nu += 1
    return recip, logw
