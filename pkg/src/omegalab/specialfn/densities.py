"""Gamma, the Euler-product factor lambda(z), and the omega-densities.

Conventions: ``log2 x = log log x`` and ``log3 x = log log log x``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special

from ..errors import CutoffError, DomainError, PoleError
from ..sieve import load_primes

LAMBDA_RADIUS = 10.0
DEFAULT_PRIME_CUTOFF = 10**6
# pi(t) < 1.25506 t / log t for t > 1; rounded up
_PI_UPPER = 1.26


def _is_nonpositive_integer(z: complex) -> bool:
    return z.imag == 0 and z.real <= 0 and float(z.real).is_integer()


def gamma(z):
    """Gamma function for real or complex ``z``.

    Raises:
        PoleError: at ``z = 0, -1, -2, ...``.
    """
    zc = complex(z)
    if _is_nonpositive_integer(zc):
        raise PoleError(f"Gamma has a pole at {z}")
    if zc.imag == 0 and not isinstance(z, complex):
        return float(special.gamma(zc.real))
    return complex(special.gamma(zc))


def rgamma(z):
    """``1/Gamma(z)``, entire (zero at the poles of Gamma)."""
    zc = complex(z)
    if zc.imag == 0 and not isinstance(z, complex):
        return float(special.rgamma(zc.real))
    return complex(special.rgamma(zc))


def prime_tail_reciprocal_squares(cutoff: int) -> float:
    """Upper bound for the sum of ``1/p^2`` over primes ``p > cutoff``.

    From the Chebyshev-type bound ``pi(t) < 1.26 t / log t`` and partial
    summation: the tail is at most ``2.52 / (cutoff * log cutoff)``.
    """
    return 2 * _PI_UPPER / (cutoff * math.log(cutoff))


def euler_tail_bound(z: complex, cutoff: int) -> float:
    """Certified bound on ``|sum_{p > cutoff} log(local factor)|``.

    For ``p >= 2|z| + 1`` each logarithm is at most ``(3|z| + 4|z|^2)/p^2``
    in modulus; the bound is then doubled as a safety margin.
    """
    a = abs(z)
    if cutoff < 2 * a + 1:
        raise CutoffError(f"cutoff {cutoff} too small for |z|={a:.3g}")
    return 2.0 * (3 * a + 4 * a * a) * prime_tail_reciprocal_squares(cutoff)


@dataclass(frozen=True)
class LambdaValue:
    """A truncated evaluation of lambda(z) with its truncation bound."""

    value: complex
    tail_bound: float
    cutoff: int

    def __iter__(self):
        return iter((self.value, self.tail_bound))


def _log_euler_product(z: complex, primes: np.ndarray, s=None) -> complex:
    """``sum log((1 + s_p z/(p-1)) (1 - 1/p)^z)`` over ``primes``; ``s_p = 1`` if ``s`` is None."""
    pf = primes.astype(np.float64)
    zs = z if s is None else z * s
    first = zs / (pf - 1.0)
    if np.any(first == -1.0):
        return complex(-math.inf)
    return complex(np.sum(np.log1p(first + 0j)) + z * np.sum(np.log1p(-1.0 / pf)))


def euler_product(z: complex, cutoff: int, s=None) -> tuple[complex, float]:
    """Truncated product ``prod_{p <= cutoff} (1 + s_p z/(p-1)) (1-1/p)^z``.

    Returns the value and a bound on its absolute truncation error,
    assuming ``s_p = 1`` beyond ``cutoff``.
    """
    primes = load_primes(cutoff).primes
    logp = _log_euler_product(complex(z), primes, s)
    if logp.real == -math.inf:
        return 0j, 0.0
    val = complex(np.exp(logp))
    L = euler_tail_bound(complex(z), cutoff)
    return val, abs(val) * math.expm1(L)


def lambda_fn(z, prime_cutoff: int = DEFAULT_PRIME_CUTOFF, *, tol: float | None = None,
              radius: float = LAMBDA_RADIUS) -> LambdaValue:
    """``lambda(z) = 1/Gamma(z+1) * prod_p (1 + z/(p-1)) (1 - 1/p)^z``.

    The product is truncated at ``prime_cutoff``; ``tail_bound`` bounds the
    absolute difference to the infinite product.

    Raises:
        DomainError: if ``|z| > radius`` or ``prime_cutoff < 100``.
        CutoffError: if ``tol`` is given and the tail bound exceeds it.
    """
    z = complex(z)
    if abs(z) > radius:
        raise DomainError(f"|z| = {abs(z):.3g} exceeds radius {radius}")
    if prime_cutoff < 100:
        raise DomainError("prime_cutoff must be >= 100")
    val, bound = _lambda_cached(z, int(prime_cutoff))
    if tol is not None and bound > tol:
        raise CutoffError(f"tail bound {bound:.3g} exceeds tolerance {tol:.3g}")
    return LambdaValue(val, bound, int(prime_cutoff))


@lru_cache(maxsize=4096)
def _lambda_cached(z: complex, cutoff: int) -> tuple[complex, float]:
    prod, bound = euler_product(z, cutoff)
    rg = complex(special.rgamma(z + 1))
    return rg * prod, abs(rg) * bound


def lambda_real(kappa: float, prime_cutoff: int = DEFAULT_PRIME_CUTOFF) -> float:
    return lambda_fn(kappa, prime_cutoff).value.real


def bigQ(kappa: float) -> float:
    """``Q(kappa) = kappa log kappa - kappa + 1`` with ``Q(0) = 1``."""
    if kappa < 0:
        raise DomainError("kappa must be >= 0")
    if kappa == 0:
        return 1.0
    return kappa * math.log(kappa) - kappa + 1.0


def _logs(x) -> tuple[float, float]:
    lx = math.log(x)
    if lx <= 1:
        raise DomainError(f"log log x undefined or nonpositive for x={x}")
    return lx, math.log(lx)


@dataclass(frozen=True)
class DensityParams:
    """The quantities ``kappa``, ``log2 x`` and ``log3 x`` attached to ``(x, k)``."""

    x: float
    k: int
    kappa: float
    loglog: float
    logloglog: float

    @classmethod
    def of(cls, x, k: int) -> "DensityParams":
        if x < 3:
            raise DomainError("x must be >= 3")
        if k < 1:
            raise DomainError("k must be >= 1")
        ll = math.log(math.log(x))
        lll = math.log(ll) if ll > 0 else -math.inf
        return cls(float(x), int(k), (k - 1) / ll, ll, lll)


def delta_k(x, k: int, prime_cutoff: int = DEFAULT_PRIME_CUTOFF) -> float:
    """Density ``lambda(kappa) (log2 x)^(k-1) / ((log x) (k-1)!)`` of ``E_k`` near ``x``."""
    p = DensityParams.of(x, k)
    lam = lambda_real(p.kappa, prime_cutoff)
    return lam * math.exp((k - 1) * math.log(p.loglog) - math.lgamma(k)) / math.log(x)


def F_k(x, k: int) -> float:
    """``(log2 x)^2 / k^2 * (1 - exp(-k log3 x / log2 x))^(-1)``.

    ``x`` may be a Python integer too large for a float.
    """
    if k < 1:
        raise DomainError("k must be >= 1")
    if x <= 1:
        raise DomainError("x must exceed e^e")
    lx = math.log(x)
    if lx <= 1:
        raise DomainError("x must exceed e^e")
    l2 = math.log(lx)
    if l2 <= 1:
        raise DomainError("log3 x must be positive (x > e^e)")
    l3 = math.log(l2)
    return l2 * l2 / (k * k) / -math.expm1(-k * l3 / l2)
