"""Prime tables, segmented interval factorisation and exact counting.

Everything here is exact integer arithmetic on numpy ``int64`` arrays.
Intervals are half-open on the left: ``(x, x + y]`` contains the ``y``
integers ``x + 1, ..., x + y``.
"""

from __future__ import annotations

import math
import os
import struct
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import CapacityError, DegenerateFormsError, DomainError, InsufficientPrimesError

MAX_PRIME_LIMIT = 400_000_000
MAX_INTERVAL_END = 2**63 - 1
DEFAULT_SEGMENT_SIZE = 2**20

PRIME_CACHE_MAGIC = b"OMLPRIME"
PRIME_CACHE_VERSION = 1
_PRIME_HEADER = struct.Struct("<8sIQQ")


# ---------------------------------------------------------------------------
# prime tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PrimeTable:
    """All primes ``p <= limit`` as a read-only ``int64`` array."""

    limit: int
    primes: np.ndarray

    def __post_init__(self):
        self.primes.setflags(write=False)

    def __len__(self) -> int:
        return len(self.primes)

    def __iter__(self) -> Iterator[int]:
        return (int(p) for p in self.primes)

    def __contains__(self, n) -> bool:
        i = np.searchsorted(self.primes, n)
        return bool(i < len(self.primes) and self.primes[i] == n)

    def upto(self, bound) -> np.ndarray:
        """Primes ``p <= bound`` (a view)."""
        if bound > self.limit:
            raise InsufficientPrimesError(f"prime table reaches {self.limit}, need {bound}")
        return self.primes[: np.searchsorted(self.primes, bound, side="right")]

    def between(self, lo, hi) -> np.ndarray:
        """Primes in the half-open window ``]lo, hi]``."""
        if hi > self.limit:
            raise InsufficientPrimesError(f"prime table reaches {self.limit}, need {hi}")
        a = np.searchsorted(self.primes, lo, side="right")
        b = np.searchsorted(self.primes, hi, side="right")
        return self.primes[a:b]

    def truncated(self, limit: int) -> "PrimeTable":
        if limit > self.limit:
            raise InsufficientPrimesError(f"prime table reaches {self.limit}, need {limit}")
        return PrimeTable(limit, self.primes[: np.searchsorted(self.primes, limit, side="right")].copy())


def generate_primes(limit: int, *, max_limit: int = MAX_PRIME_LIMIT) -> PrimeTable:
    """Sieve of Eratosthenes over odd numbers.

    Raises:
        CapacityError: if ``limit`` exceeds ``max_limit``.
    """
    limit = int(limit)
    if limit < 0:
        raise DomainError("limit must be >= 0")
    if limit > max_limit:
        raise CapacityError(f"prime limit {limit} exceeds configured maximum {max_limit}")
    if limit < 2:
        return PrimeTable(limit, np.zeros(0, dtype=np.int64))
    # index i stands for 2*i + 1
    odd = np.ones((limit - 1) // 2 + 1, dtype=bool)
    odd[0] = False
    for i in range(1, (math.isqrt(limit) - 1) // 2 + 1):
        if odd[i]:
            p = 2 * i + 1
            odd[p * p // 2 :: p] = False
    primes = np.concatenate(([2], 2 * np.flatnonzero(odd) + 1)).astype(np.int64)
    return PrimeTable(limit, primes)


def write_prime_cache(path, table: PrimeTable) -> None:
    """Persist ``table``: magic, version u32, limit u64, count u64, u32 gaps."""
    gaps = np.diff(table.primes, prepend=0).astype("<u4")
    tmp = Path(str(path) + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(_PRIME_HEADER.pack(PRIME_CACHE_MAGIC, PRIME_CACHE_VERSION, table.limit, len(gaps)))
        fh.write(gaps.tobytes())
    os.replace(tmp, path)


def read_prime_cache(path) -> PrimeTable | None:
    """Load a cache file; ``None`` if missing, corrupt or of another version."""
    try:
        raw = Path(path).read_bytes()
    except OSError:
        return None
    if len(raw) < _PRIME_HEADER.size:
        return None
    magic, version, limit, count = _PRIME_HEADER.unpack_from(raw)
    if magic != PRIME_CACHE_MAGIC or version != PRIME_CACHE_VERSION:
        return None
    body = raw[_PRIME_HEADER.size :]
    if len(body) != 4 * count:
        return None
    primes = np.cumsum(np.frombuffer(body, dtype="<u4").astype(np.int64))
    return PrimeTable(int(limit), primes)


_memory_cache: dict[str, PrimeTable] = {}
_memory_lock = threading.Lock()


def load_primes(limit: int, cache_dir=None) -> PrimeTable:
    """Primes up to ``limit``, reusing an in-memory or on-disk table.

    The disk cache is only consulted when ``cache_dir`` is given.  A cached
    table with a larger limit is truncated rather than regenerated.
    """
    limit = max(int(limit), 0)
    key = str(cache_dir)
    with _memory_lock:
        table = _memory_cache.get(key)
        if table is not None and table.limit >= limit:
            return table.truncated(limit) if table.limit > limit else table
    table = None
    path = None
    if cache_dir is not None:
        path = Path(cache_dir) / f"primes-v{PRIME_CACHE_VERSION}.bin"
        table = read_prime_cache(path)
        if table is not None and table.limit < limit:
            table = None
    if table is None:
        # small tables are padded so repeated tiny requests share one sieve
        table = generate_primes(max(limit, min(1 << 16, MAX_PRIME_LIMIT)))
        if path is not None:
            path.parent.mkdir(parents=True, exist_ok=True)
            write_prime_cache(path, table)
    with _memory_lock:
        current = _memory_cache.get(key)
        if current is None or current.limit < table.limit:
            _memory_cache[key] = table
    return table.truncated(limit) if table.limit > limit else table


def primes_for_interval(x: int, y: int, cache_dir=None) -> PrimeTable:
    return load_primes(math.isqrt(x + y), cache_dir)


def max_omega_upto(n: int) -> int:
    """Largest value of omega(m) over 1 <= m <= n (primorial bound)."""
    k, prod, p = 0, 1, 2
    while True:
        while any(p % q == 0 for q in range(2, math.isqrt(p) + 1)):
            p += 1
        if prod * p > n:
            return k
        prod *= p
        k += 1
        p += 1


# ---------------------------------------------------------------------------
# interval factor tables
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FactorEntry:
    """Full factorisation of a single integer ``n`` as ``((p, e), ...)``."""

    n: int
    factors: tuple

    @property
    def omega(self) -> int:
        return len(self.factors)

    @property
    def bigomega(self) -> int:
        return sum(e for _, e in self.factors)

    @property
    def largest_prime(self) -> int:
        return self.factors[-1][0] if self.factors else 1

    @property
    def squarefull_primes(self) -> frozenset:
        return frozenset(p for p, e in self.factors if e >= 2)

    def prime_divisors_in(self, lo, hi) -> list:
        return [(p, e) for p, e in self.factors if lo < p <= hi]


@dataclass(frozen=True, eq=False)
class IntervalFactorTable:
    """Per-integer factor statistics for ``n`` in ``(x, x + y]``.

    When built with factors, ``offsets`` indexes a CSR layout:
    the prime factors of ``x + 1 + i`` are
    ``factor_primes[offsets[i]:offsets[i+1]]`` in increasing order.
    """

    x: int
    y: int
    omega: np.ndarray
    bigomega: np.ndarray
    largest_prime: np.ndarray
    offsets: np.ndarray | None = None
    factor_primes: np.ndarray | None = None
    factor_exponents: np.ndarray | None = None

    def __post_init__(self):
        for arr in (self.omega, self.bigomega, self.largest_prime, self.offsets,
                    self.factor_primes, self.factor_exponents):
            if arr is not None:
                arr.setflags(write=False)

    @property
    def numbers(self) -> np.ndarray:
        return np.arange(self.x + 1, self.x + self.y + 1, dtype=np.int64)

    @property
    def has_factors(self) -> bool:
        return self.offsets is not None

    def _require_factors(self):
        if self.offsets is None:
            raise ValueError("table was built without factor lists (with_factors=False)")

    def index(self, n: int) -> int:
        if not self.x < n <= self.x + self.y:
            raise IndexError(f"{n} not in ({self.x}, {self.x + self.y}]")
        return n - self.x - 1

    def factors(self, n: int) -> tuple:
        self._require_factors()
        i = self.index(n)
        a, b = self.offsets[i], self.offsets[i + 1]
        return tuple(zip(self.factor_primes[a:b].tolist(), self.factor_exponents[a:b].tolist()))

    def entry(self, n: int) -> FactorEntry:
        return FactorEntry(int(n), self.factors(n))

    def entries(self) -> Iterator[FactorEntry]:
        for n in range(self.x + 1, self.x + self.y + 1):
            yield self.entry(n)

    def squarefull_primes(self, n: int) -> frozenset:
        return self.entry(n).squarefull_primes

    def prime_divisors_in(self, n: int, lo, hi) -> list:
        return self.entry(n).prime_divisors_in(lo, hi)

    def factor_rows(self) -> np.ndarray:
        """Row index (0-based position in the interval) of every factor triple."""
        self._require_factors()
        return np.repeat(np.arange(self.y, dtype=np.int64), np.diff(self.offsets))


def _sieve_segment(lo: int, hi: int, primes: np.ndarray, with_factors: bool):
    size = hi - lo + 1
    residual = np.arange(lo, hi + 1, dtype=np.int64)
    omega = np.zeros(size, dtype=np.int8)
    bigomega = np.zeros(size, dtype=np.int8)
    largest = np.ones(size, dtype=np.int64)
    rows, fprimes, fexps = [], [], []
    for p in primes[: np.searchsorted(primes, math.isqrt(hi), side="right")].tolist():
        first = (-lo) % p
        if first >= size:
            continue
        sl = slice(first, size, p)
        omega[sl] += 1
        bigomega[sl] += 1
        largest[sl] = p
        residual[sl] //= p
        if with_factors:
            exps = np.ones(len(range(first, size, p)), dtype=np.int8)
        pe = p
        while pe <= hi // p:
            pe *= p
            start = (-lo) % pe
            if start >= size:
                break
            residual[start::pe] //= p
            bigomega[start::pe] += 1
            if with_factors:
                exps[(start - first) // p :: pe // p] += 1
        if with_factors:
            rows.append(np.arange(first, size, p, dtype=np.int64))
            fprimes.append(np.full(len(exps), p, dtype=np.int64))
            fexps.append(exps)
    big = np.flatnonzero(residual > 1)
    omega[big] += 1
    bigomega[big] += 1
    largest[big] = residual[big]
    if not with_factors:
        return omega, bigomega, largest, None, None, None
    rows.append(big.astype(np.int64))
    fprimes.append(residual[big])
    fexps.append(np.ones(len(big), dtype=np.int8))
    r = np.concatenate(rows)
    order = np.argsort(r, kind="stable")
    counts = np.bincount(r, minlength=size)
    return (omega, bigomega, largest, counts,
            np.concatenate(fprimes)[order], np.concatenate(fexps)[order])


def sieve_interval(x: int, y: int, primes: PrimeTable | None = None, *,
                   with_factors: bool = True, segment_size: int = DEFAULT_SEGMENT_SIZE,
                   threads: int = 1) -> IntervalFactorTable:
    """Factor every ``n`` in ``(x, x + y]`` by segmented sieving.

    Primes up to ``isqrt(x + y)`` are sieved out; a residual above one is
    itself prime.  The result does not depend on ``segment_size`` or
    ``threads``.
    """
    x, y = int(x), int(y)
    if y < 1:
        raise DomainError("interval length y must be >= 1")
    if x < 0:
        raise DomainError("interval start x must be >= 0")
    if x + y > MAX_INTERVAL_END:
        raise CapacityError("interval end exceeds 64-bit range")
    need = math.isqrt(x + y)
    if primes is None:
        primes = load_primes(need)
    elif primes.limit < need:
        raise InsufficientPrimesError(f"prime table reaches {primes.limit}, need {need}")
    segment_size = max(int(segment_size), 1)
    bounds = [(lo, min(lo + segment_size - 1, x + y)) for lo in range(x + 1, x + y + 1, segment_size)]

    def work(b):
        return _sieve_segment(b[0], b[1], primes.primes, with_factors)

    if threads > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(work, bounds))
    else:
        parts = [work(b) for b in bounds]
    omega = np.concatenate([p[0] for p in parts])
    bigomega = np.concatenate([p[1] for p in parts])
    largest = np.concatenate([p[2] for p in parts])
    if not with_factors:
        return IntervalFactorTable(x, y, omega, bigomega, largest)
    counts = np.concatenate([p[3] for p in parts])
    offsets = np.zeros(y + 1, dtype=np.int64)
    np.cumsum(counts, out=offsets[1:])
    return IntervalFactorTable(x, y, omega, bigomega, largest, offsets,
                               np.concatenate([p[4] for p in parts]),
                               np.concatenate([p[5] for p in parts]))


def factorize(n: int, primes: PrimeTable | None = None) -> tuple:
    """Trial-division factorisation of a single positive integer."""
    n = int(n)
    if n < 1:
        raise DomainError("n must be >= 1")
    if primes is None:
        primes = load_primes(math.isqrt(n))
    out = []
    for p in primes.upto(math.isqrt(n)).tolist():
        if p * p > n:
            break
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            out.append((p, e))
    if n > 1:
        out.append((n, 1))
    return tuple(out)


# ---------------------------------------------------------------------------
# counting primitives
# ---------------------------------------------------------------------------


def count_pik(x: int, y: int, k: int, primes: PrimeTable | None = None, **kw) -> int:
    """Number of ``n`` in ``(x, x + y]`` with exactly ``k`` distinct prime factors."""
    if k < 0:
        raise DomainError("k must be >= 0")
    table = sieve_interval(x, y, primes, with_factors=False, **kw)
    return int(np.count_nonzero(table.omega == k))


def omega_histogram(x: int, y: int, primes: PrimeTable | None = None, **kw) -> np.ndarray:
    """``h[k]`` = number of ``n`` in ``(x, x + y]`` with ``omega(n) = k``."""
    table = sieve_interval(x, y, primes, with_factors=False, **kw)
    return np.bincount(table.omega.astype(np.int64))


def count_friable(x: int, y: int, bound: int, primes: PrimeTable | None = None, **kw) -> int:
    """Number of ``bound``-friable integers (largest prime factor <= bound) in ``(x, x + y]``."""
    if bound < 1:
        raise DomainError("bound must be >= 1")
    table = sieve_interval(x, y, primes, with_factors=False, **kw)
    return int(np.count_nonzero(table.largest_prime <= bound))


def omega_restricted(entry: FactorEntry, P, Q) -> tuple[int, bool]:
    """Distinct prime divisors of ``entry.n`` in ``]P, Q]`` and whether none is squared."""
    if not P < Q:
        raise DomainError("need P < Q")
    inside = entry.prime_divisors_in(P, Q)
    return len(inside), all(e == 1 for _, e in inside)


@dataclass(frozen=True)
class PrimeFilter:
    """A set of primes given as all primes except a union of windows ``]P_i, Q_i]``."""

    excluded: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "excluded", tuple((lo, hi) for lo, hi in self.excluded))
        for lo, hi in self.excluded:
            if not lo < hi:
                raise DomainError(f"empty excluded window ]{lo}, {hi}]")

    def allows(self, p) -> bool:
        return not any(lo < p <= hi for lo, hi in self.excluded)

    def mask(self, primes: np.ndarray) -> np.ndarray:
        keep = np.ones(len(primes), dtype=bool)
        for lo, hi in self.excluded:
            keep &= ~((primes > lo) & (primes <= hi))
        return keep

    def supports(self, table: IntervalFactorTable) -> np.ndarray:
        """Boolean mask of entries whose prime factors all lie in the set."""
        if not self.excluded:
            return np.ones(table.y, dtype=bool)
        bad = ~self.mask(table.factor_primes)
        return np.bincount(table.factor_rows()[bad], minlength=table.y) == 0


ALL_PRIMES = PrimeFilter()


@dataclass(frozen=True)
class LinearForm:
    """``Q(n) = a*n + b`` with target ``omega(Q(n)) = k`` and ``Q(n)`` in ``N_P``."""

    a: int
    b: int
    k: int
    prime_filter: PrimeFilter = field(default=ALL_PRIMES)

    def __post_init__(self):
        if self.a < 1 or self.b < 0 or self.k < 0:
            raise DomainError("need a >= 1, b >= 0, k >= 0")

    def values(self, x: int, y: int) -> tuple[int, int]:
        return self.a * (x + 1) + self.b, self.a * (x + y) + self.b

    def satisfied(self, x: int, y: int, primes: PrimeTable | None = None) -> np.ndarray:
        """Mask over ``n`` in ``(x, x + y]`` of ``omega(Q(n)) = k`` and ``Q(n) in N_P``."""
        lo, hi = self.values(x, y)
        table = sieve_interval(lo - 1, hi - lo + 1, primes,
                               with_factors=bool(self.prime_filter.excluded))
        pick = np.arange(0, hi - lo + 1, self.a)
        ok = table.omega[pick] == self.k
        if self.prime_filter.excluded:
            ok &= self.prime_filter.supports(table)[pick]
        return ok


def count_joint(x: int, y: int, form1: LinearForm, form2: LinearForm,
                primes: PrimeTable | None = None, *, strict: bool = True,
                allow_degenerate: bool = False) -> int:
    """Number of ``n`` in ``(x, x + y]`` satisfying both linear-form targets.

    Raises:
        DegenerateFormsError: if ``a1*b2 - a2*b1 == 0`` (unless ``allow_degenerate``).
        DomainError: if ``gcd(a_i, b_i) != 1`` in strict mode.
    """
    if x < 0 or y < 1:
        raise DomainError("need x >= 0 and y >= 1")
    if form1.a * form2.b - form2.a * form1.b == 0 and not allow_degenerate:
        raise DegenerateFormsError("a1*b2 - a2*b1 = 0")
    if strict:
        for f in (form1, form2):
            if math.gcd(f.a, f.b) != 1:
                raise DomainError(f"gcd({f.a}, {f.b}) != 1 in strict mode")
    if primes is not None:
        need = math.isqrt(max(form1.values(x, y)[1], form2.values(x, y)[1]))
        if primes.limit < need:
            raise InsufficientPrimesError(f"prime table reaches {primes.limit}, need {need}")
    both = form1.satisfied(x, y, primes) & form2.satisfied(x, y, primes)
    return int(np.count_nonzero(both))


# ---------------------------------------------------------------------------
# integer sets (membership predicates evaluated on factor tables)
# ---------------------------------------------------------------------------


class IntegerSet:
    """A set of positive integers decidable from a factorisation."""

    name = "set"
    needs_factors = False

    def mask(self, table: IntervalFactorTable) -> np.ndarray:
        raise NotImplementedError

    def contains(self, entry: FactorEntry) -> bool:
        raise NotImplementedError

    def __repr__(self):
        return self.name


class AllIntegers(IntegerSet):
    name = "all"

    def mask(self, table):
        return np.ones(table.y, dtype=bool)

    def contains(self, entry):
        return True


class EmptySet(IntegerSet):
    name = "empty"

    def mask(self, table):
        return np.zeros(table.y, dtype=bool)

    def contains(self, entry):
        return False


class OmegaEquals(IntegerSet):
    """``E_k``: integers with exactly ``k`` distinct prime factors."""

    def __init__(self, k: int):
        self.k = int(k)
        self.name = f"E_{self.k}"

    def mask(self, table):
        return table.omega == self.k

    def contains(self, entry):
        return entry.omega == self.k


class Friable(IntegerSet):
    """Integers whose largest prime factor is at most ``bound``."""

    def __init__(self, bound: int):
        self.bound = int(bound)
        self.name = f"friable_{self.bound}"

    def mask(self, table):
        return table.largest_prime <= self.bound

    def contains(self, entry):
        return entry.largest_prime <= self.bound


class MaskSet(IntegerSet):
    """An explicit finite set given by sorted members (e.g. a random subset)."""

    def __init__(self, members: Sequence[int], name: str = "explicit"):
        self.members = np.unique(np.asarray(members, dtype=np.int64))
        self.name = name

    def mask(self, table):
        return np.isin(table.numbers, self.members)

    def contains(self, entry):
        i = np.searchsorted(self.members, entry.n)
        return bool(i < len(self.members) and self.members[i] == entry.n)


def parse_integer_set(text: str) -> IntegerSet:
    """``all``, ``empty``, ``E3`` / ``E_3``, ``friable:100``."""
    t = text.strip().lower()
    if t == "all":
        return AllIntegers()
    if t in ("empty", "none"):
        return EmptySet()
    if t.startswith("e"):
        return OmegaEquals(int(t[1:].lstrip("_")))
    if t.startswith("friable:"):
        return Friable(int(t.split(":", 1)[1]))
    raise DomainError(f"unknown integer set {text!r}")
