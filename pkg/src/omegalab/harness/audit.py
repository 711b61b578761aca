"""Independent recounts by vectorised trial division.

The sieve factors a whole interval by striding over multiples of each prime.
The audit route instead divides every number of the interval by each prime in
turn, so that the two routes share nothing beyond the prime table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..sieve import FactorEntry, PrimeTable, load_primes
from ..sset import SConfig, is_member_S


@dataclass(frozen=True)
class TrialDivision:
    """Factorisations of ``lo..hi`` (inclusive) as flat ``(row, prime, exponent)`` triples.

    Triples are sorted by row, then by prime.
    """

    lo: int
    omega: np.ndarray
    largest: np.ndarray
    rows: np.ndarray
    primes: np.ndarray
    exps: np.ndarray

    def entry(self, i: int) -> FactorEntry:
        a, b = np.searchsorted(self.rows, [i, i + 1])
        pairs = zip(self.primes[a:b].tolist(), self.exps[a:b].tolist())
        return FactorEntry(self.lo + i, tuple(pairs))


def trial_division(lo: int, hi: int, primes: PrimeTable | None = None) -> TrialDivision:
    if hi < lo or lo < 1:
        raise ValueError("need 1 <= lo <= hi")
    if primes is None:
        primes = load_primes(math.isqrt(hi))
    n = np.arange(lo, hi + 1, dtype=np.int64)
    rem = n.copy()
    omega = np.zeros(n.size, dtype=np.int64)
    largest = np.ones(n.size, dtype=np.int64)
    rows, ps, es = [], [], []
    for p in primes.upto(math.isqrt(hi)).tolist():
        idx = np.flatnonzero(rem % p == 0)
        if idx.size == 0:
            continue
        omega[idx] += 1
        largest[idx] = p
        e = np.zeros(idx.size, dtype=np.int64)
        live = np.arange(idx.size)
        while live.size:
            rem[idx[live]] //= p
            e[live] += 1
            live = live[rem[idx[live]] % p == 0]
        rows.append(idx)
        ps.append(np.full(idx.size, p, dtype=np.int64))
        es.append(e)
    big = np.flatnonzero(rem > 1)
    omega[big] += 1
    largest[big] = rem[big]
    rows.append(big)
    ps.append(rem[big])
    es.append(np.ones(big.size, dtype=np.int64))
    rows, ps, es = np.concatenate(rows), np.concatenate(ps), np.concatenate(es)
    order = np.lexsort((ps, rows))
    return TrialDivision(lo, omega, largest, rows[order], ps[order], es[order])


def recount_pik(x: int, length: int, k: int, primes=None) -> int:
    return int(np.count_nonzero(trial_division(x + 1, x + length, primes).omega == k))


def recount_friable(x: int, length: int, bound: int, primes=None) -> int:
    return int(np.count_nonzero(trial_division(x + 1, x + length, primes).largest <= bound))


def recount_deficient(x: int, length: int, k: int, P: int, Q: int, primes=None) -> int:
    td = trial_division(x + 1, x + length, primes)
    hit = np.zeros(td.omega.size, dtype=bool)
    inside = (td.primes > P) & (td.primes <= Q)
    hit[td.rows[inside]] = True
    return int(np.count_nonzero((td.omega == k) & ~hit))


def recount_structured(x: int, length: int, k: int, config: SConfig, primes=None) -> int:
    """``#{n in (x, x + length]: omega(n) = k, n in S}`` through the per-integer membership route."""
    td = trial_division(x + 1, x + length, primes)
    return sum(is_member_S(td.entry(int(i)), config) for i in np.flatnonzero(td.omega == k))
