"""Selberg-Delange machinery: tau_z, g_z, the sums S(x, x') and contour recovery.

For a multiplicative weight ``f`` the generating sum

    S(x, x'; z) = sum_{x < n <= x + x'} f(n) z^omega(n)

is a polynomial in ``z``; the weighted count of ``n`` with ``omega(n) = k``
is its ``k``-th coefficient, recovered by a trapezoidal Cauchy integral.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import CutoffError, DomainError
from .sieve import IntervalFactorTable, PrimeTable, factorize, load_primes, sieve_interval
from .specialfn.densities import euler_product, rgamma

G_TAIL_MAX_D = 10**6


class EnumerationBoundWarning(UserWarning):
    """A diagnostic sum was truncated at its enumeration bound."""


@dataclass(frozen=True)
class MultiplicativeWeight:
    """A multiplicative ``f >= 0`` given on prime powers.

    ``func(p, nu)`` must accept numpy arrays.  For primes ``p > y`` the
    weight is ``1`` regardless of ``func``; ``y=None`` applies ``func``
    to every prime.
    """

    func: Callable
    beta1: float = 1.0
    beta2: float = 1.0
    y: float | None = None
    name: str = "f"

    def __post_init__(self):
        if not self.beta1 > 0 or not 0 < self.beta2 < 2:
            raise DomainError("need beta1 > 0 and 0 < beta2 < 2")

    def local(self, p, nu) -> np.ndarray:
        p = np.asarray(p)
        nu = np.asarray(nu)
        val = np.asarray(self.func(p, nu), dtype=np.float64) * np.ones(np.broadcast(p, nu).shape)
        if self.y is not None:
            val = np.where(p > self.y, 1.0, val)
        return val

    def at(self, n: int) -> float:
        out = 1.0
        for p, e in factorize(n):
            out *= float(self.local(p, e))
        return out

    def values(self, table: IntervalFactorTable) -> np.ndarray:
        """``f(n)`` for every ``n`` of a factor table."""
        out = np.ones(table.y)
        loc = self.local(table.factor_primes, table.factor_exponents)
        np.multiply.at(out, table.factor_rows(), loc)
        return out

    def bound_violations(self, p, nu) -> np.ndarray:
        """Mask of grid points where ``f(p^nu) > beta1 beta2^(nu-1)`` or ``f < 0``."""
        v = self.local(p, nu)
        return (v < 0) | (v > self.beta1 * self.beta2 ** (np.asarray(nu) - 1.0) * (1 + 1e-12))

    def s_p(self, primes: np.ndarray, tol: float = 1e-17) -> np.ndarray:
        """``s_p = (p-1) sum_{nu >= 1} f(p^nu) / p^nu`` (``1`` for ``p > y``)."""
        pf = primes.astype(np.float64)
        acc = np.zeros(len(pf))
        inv_pow = np.ones(len(pf))
        nu = 1
        ratio_bound = self.beta2 / 2.0
        while True:
            inv_pow /= pf
            acc += self.local(primes, np.full(len(primes), nu)) * inv_pow
            # remaining terms are at most beta1 (beta2/p)^nu / (1 - beta2/p)
            if self.beta1 * ratio_bound**nu / (1 - ratio_bound) < tol or nu > 200:
                break
            nu += 1
        s = (pf - 1.0) * acc
        if self.y is not None:
            s = np.where(pf > self.y, 1.0, s)
        return s


def constant_one() -> MultiplicativeWeight:
    # y = 1: the tail rule alone makes f(p^nu) = 1 for every prime
    return MultiplicativeWeight(lambda p, nu: np.ones(np.shape(p)), 1.0, 1.0, 1.0, "one")


def friable_indicator(bound: float) -> MultiplicativeWeight:
    """``f(n) = 1`` if every prime factor of ``n`` is ``<= bound``, else ``0``."""
    return MultiplicativeWeight(lambda p, nu: (np.asarray(p) <= bound).astype(np.float64),
                                1.0, 1.0, None, f"friable<={bound:g}")


def id_over_phi(power: float, y: float | None = None) -> MultiplicativeWeight:
    """``f(p^nu) = (p/(p-1))^power``, i.e. ``(Id/phi)^power``."""
    return MultiplicativeWeight(lambda p, nu: (np.asarray(p, dtype=np.float64)
                                               / (np.asarray(p, dtype=np.float64) - 1.0)) ** power,
                                2.0**power, 1.0, y, f"(id/phi)^{power:g}")


# ---------------------------------------------------------------------------
# arithmetic functions
# ---------------------------------------------------------------------------


def binom_z(z: complex, nu: int) -> complex:
    """``binom(z + nu - 1, nu) = prod_{i<nu} (z + i)/(i + 1)``."""
    out = 1 + 0j
    for i in range(nu):
        out *= (z + i) / (i + 1)
    return out


def tau_z(n: int, z: complex) -> complex:
    """Coefficient of ``n^{-s}`` in ``zeta(s)^z``."""
    if n < 1:
        raise DomainError("n must be >= 1")
    out = 1 + 0j
    for _, e in factorize(n):
        out *= binom_z(z, e)
    return out


def g_local(p: int, nu: int, z: complex, f: MultiplicativeWeight) -> complex:
    """``g_z(p^nu) = sum_{i=0}^{nu} f(p^i) z^[i>0] tau_{-z}(p^{nu-i})``."""
    total = binom_z(-z, nu)
    for i in range(1, nu + 1):
        total += float(f.local(p, i)) * z * binom_z(-z, nu - i)
    return total


def g_z(n: int, z: complex, f: MultiplicativeWeight) -> complex:
    """``g_z = (f z^omega) * tau_{-z}`` (Dirichlet convolution), evaluated multiplicatively."""
    if n < 1:
        raise DomainError("n must be >= 1")
    out = 1 + 0j
    for p, e in factorize(n):
        out *= g_local(p, e, z, f)
    return out


def _g_local_array(p: np.ndarray, nu: np.ndarray, z: complex, f: MultiplicativeWeight) -> np.ndarray:
    top = int(nu.max()) if len(nu) else 0
    b = [binom_z(-z, m) for m in range(top + 1)]
    out = np.array([b[m] for m in nu.tolist()], dtype=complex)
    for i in range(1, top + 1):
        sel = nu >= i
        tail = np.array([b[m - i] for m in nu[sel].tolist()], dtype=complex)
        out[sel] += f.local(p[sel], np.full(int(sel.sum()), i)) * z * tail
    return out


def g_z_values(table: IntervalFactorTable, z: complex, f: MultiplicativeWeight) -> np.ndarray:
    """``g_z(n)`` for every ``n`` of a factor table."""
    out = np.ones(table.y, dtype=complex)
    loc = _g_local_array(table.factor_primes, table.factor_exponents.astype(np.int64), z, f)
    np.multiply.at(out, table.factor_rows(), loc)
    return out


@dataclass(frozen=True)
class GTail:
    value: float
    t: float
    D: int
    truncated: bool


def g_z_tail(t: float, z: complex, f: MultiplicativeWeight, D: int = G_TAIL_MAX_D) -> GTail:
    """``sum_{t < d <= D} |g_z(d)| / d``, the enumerated part of the tail.

    ``D`` is capped at ``10^6``; a warning reports the truncation.
    """
    if t < 1:
        raise DomainError("t must be >= 1")
    if D > G_TAIL_MAX_D:
        warnings.warn(f"enumeration bound {D} capped at {G_TAIL_MAX_D}", EnumerationBoundWarning, stacklevel=2)
        D = G_TAIL_MAX_D
    warnings.warn(f"g_z tail truncated at D={D}", EnumerationBoundWarning, stacklevel=2)
    lo = int(math.floor(t))
    if lo >= D:
        return GTail(0.0, t, D, True)
    table = sieve_interval(lo, D - lo)
    g = g_z_values(table, complex(z), f)
    d = np.arange(lo + 1, D + 1, dtype=np.float64)
    return GTail(math.fsum(np.abs(g) / d), t, D, True)


def g_z_tail_profile(ts, z: complex, f: MultiplicativeWeight, D: int = G_TAIL_MAX_D) -> np.ndarray:
    """Tail sums at several ``t`` from one enumeration of ``g_z`` on ``[1, D]``."""
    if D > G_TAIL_MAX_D:
        warnings.warn(f"enumeration bound {D} capped at {G_TAIL_MAX_D}", EnumerationBoundWarning, stacklevel=2)
    D = min(int(D), G_TAIL_MAX_D)
    table = sieve_interval(0, D)
    terms = np.abs(g_z_values(table, complex(z), f)) / np.arange(1, D + 1, dtype=np.float64)
    out = []
    for t in ts:
        lo = int(math.floor(t))
        out.append(math.fsum(terms[lo:]) if lo < D else 0.0)
    return np.array(out)


# ---------------------------------------------------------------------------
# generating sums
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class WeightedOmega:
    """``f(n)`` and ``omega(n)`` over an interval, shared by many ``z`` evaluations."""

    x: int
    xprime: int
    weights: np.ndarray
    omega: np.ndarray

    @classmethod
    def build(cls, x: int, xprime: int, f: MultiplicativeWeight, primes: PrimeTable | None = None,
              threads: int = 1) -> "WeightedOmega":
        table = sieve_interval(x, xprime, primes, threads=threads)
        return cls(int(x), int(xprime), f.values(table), table.omega.astype(np.int64))

    @property
    def max_omega(self) -> int:
        return int(self.omega.max()) if len(self.omega) else 0

    def S(self, z: complex) -> complex:
        # numpy gives 0**0 == 1, the required convention
        return complex(np.sum(self.weights * np.power(complex(z), self.omega)))


def S_direct(x: int, xprime: int, z: complex, f: MultiplicativeWeight | None = None,
             primes: PrimeTable | None = None) -> complex:
    """Exact ``sum_{x < n <= x + x'} f(n) z^omega(n)`` (with ``0^0 = 1``)."""
    f = f or constant_one()
    return WeightedOmega.build(x, xprime, f, primes).S(z)


def h0(z: complex, f: MultiplicativeWeight, cutoff: int = 10**6) -> tuple[complex, float]:
    """``h_0(z) = 1/Gamma(z+1) prod_p (1 + s_p z/(p-1)) (1-1/p)^z`` and a truncation bound.

    Raises:
        CutoffError: if ``cutoff < y`` (then ``s_p`` is unknown past ``cutoff``).
    """
    if f.y is None:
        raise CutoffError("weight must equal 1 beyond a finite y for the Euler product")
    if f.y is not None and cutoff < f.y:
        raise CutoffError(f"cutoff {cutoff} below y={f.y}")
    primes = load_primes(cutoff).primes
    s = f.s_p(primes)
    prod, bound = euler_product(complex(z), cutoff, s)
    rg = complex(rgamma(complex(z) + 1))
    return rg * prod, abs(rg) * bound


def S_mainterm(x: float, xprime: float, z: complex, f: MultiplicativeWeight | None = None,
               cutoff: int = 10**6) -> complex:
    """``x' (log x)^{z-1} lambda_0(z)`` with ``lambda_0(z) = z h_0(z)``."""
    if x < 3:
        raise DomainError("x must be >= 3")
    f = f or constant_one()
    z = complex(z)
    h, _ = h0(z, f, cutoff)
    return xprime * complex(math.log(x)) ** (z - 1) * z * h


def contour_radius(x: float, k: int) -> float:
    """``kappa = (k-1)/log2 x`` for ``k >= 2``; ``1/2`` for ``k = 1``."""
    if k < 1:
        raise DomainError("k must be >= 1")
    if k == 1:
        return 0.5
    return (k - 1) / math.log(math.log(x))


def cauchy_coefficient(S: Callable[[complex], complex], k: int, radius: float, nodes: int) -> complex:
    """``(1/N) sum_j S(z_j) z_j^{-k}`` on ``z_j = r e^{2 pi i j/N}``."""
    if nodes < 8:
        raise DomainError("need at least 8 nodes")
    if not radius > 0:
        raise DomainError("contour radius must be positive")
    acc = []
    for j in range(nodes):
        zj = radius * complex(math.cos(2 * math.pi * j / nodes), math.sin(2 * math.pi * j / nodes))
        acc.append(S(zj) * zj ** (-k))
    re = math.fsum(a.real for a in acc) / nodes
    im = math.fsum(a.imag for a in acc) / nodes
    return complex(re, im)


def cauchy_pik(x: int, xprime: int, k: int, f: MultiplicativeWeight | None = None, nodes: int = 64,
               *, radius: float | None = None, data: WeightedOmega | None = None) -> float:
    """Weighted count of ``n`` in ``(x, x + x']`` with ``omega(n) = k`` by contour quadrature.

    Exact (up to rounding) once ``nodes`` exceeds the largest ``omega`` in
    the interval, because the integrand is a polynomial.
    """
    f = f or constant_one()
    if data is None:
        data = WeightedOmega.build(x, xprime, f)
    r = contour_radius(max(x, 3), k) if radius is None else radius
    return cauchy_coefficient(data.S, k, r, nodes).real


def write_contour_csv(path, rows) -> None:
    """Rows of ``(k, nodes, estimate, exact)``; ``abs_err`` is derived."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "nodes", "estimate", "exact", "abs_err"])
        for k, nodes, est, exact in rows:
            w.writerow([k, nodes, repr(float(est)), exact, repr(abs(float(est) - exact))])
