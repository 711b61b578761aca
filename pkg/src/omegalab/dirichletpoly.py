"""Dirichlet polynomials over A intersect S, the layer factorisation, and mean-value diagnostics.

For a layer ``j`` with window ``]P, Q]`` and fineness ``H``, the indicator
polynomial ``B(s)`` of ``A ∩ S`` on ``(X, 2X]`` is split as::

    B(s) = sum_{v in I_j} Q_v(s) R_v(s) + N(s),

where ``Q_v`` runs over window primes of subwindow ``v``, ``R_v`` over
``m ∈ A'`` with ``X e^{-v/H} < m <= 2X e^{-v/H}``, coprime to the window
primes of subwindow ``v``, weighted by ``1/(omega_window(m) + 1)``.

The residual ``N`` is computed constructively.  Its support is
``(2X, 2X e^{1/H}]`` together with the lower strip ``(X, X e^{1/H}]``,
where a prime factor ``p`` of ``n`` can leave ``n/p`` below the range of
``R_v``; both parts are reported separately.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DomainError
from .sieve import IntegerSet, IntervalFactorTable, PrimeTable, load_primes, max_omega_upto, sieve_interval
from .sset import INF_INDEX, Layer, SConfig, member_mask, subwindow_index


@dataclass(frozen=True, eq=False)
class CoeffVector:
    """Sparse coefficients ``a_n`` for ``start < n <= end``."""

    start: int
    end: int
    indices: np.ndarray
    coeffs: np.ndarray
    bound: float = 1.0

    def __post_init__(self):
        idx = np.asarray(self.indices, dtype=np.int64)
        co = np.asarray(self.coeffs)
        if idx.shape != co.shape:
            raise DomainError("indices and coefficients differ in length")
        if len(idx) and (idx.min() <= self.start or idx.max() > self.end):
            raise DomainError(f"indices must lie in ({self.start}, {self.end}]")
        if len(idx) and np.any(np.diff(idx) <= 0):
            raise DomainError("indices must be strictly increasing")
        if len(co) and np.max(np.abs(co)) > self.bound * (1 + 1e-12):
            raise DomainError("a coefficient exceeds the stored bound")
        object.__setattr__(self, "indices", idx)
        object.__setattr__(self, "coeffs", co)
        idx.setflags(write=False)
        co.setflags(write=False)

    @classmethod
    def empty(cls, start: int, end: int) -> "CoeffVector":
        return cls(start, end, np.zeros(0, np.int64), np.zeros(0))

    @classmethod
    def from_dense(cls, start: int, dense: np.ndarray, bound: float | None = None) -> "CoeffVector":
        """``dense[i]`` is the coefficient of ``start + 1 + i``; zeros are dropped."""
        nz = np.flatnonzero(dense)
        co = dense[nz]
        b = bound if bound is not None else (float(np.max(np.abs(co))) if len(co) else 1.0)
        return cls(start, start + len(dense), start + 1 + nz, co, b)

    def __len__(self) -> int:
        return len(self.indices)

    def __add__(self, other: "CoeffVector") -> "CoeffVector":
        lo, hi = min(self.start, other.start), max(self.end, other.end)
        idx = np.union1d(self.indices, other.indices)
        co = np.zeros(len(idx), dtype=np.result_type(self.coeffs, other.coeffs, float))
        co[np.searchsorted(idx, self.indices)] += self.coeffs
        co[np.searchsorted(idx, other.indices)] += other.coeffs
        return CoeffVector(lo, hi, idx, co, self.bound + other.bound)

    def dense(self) -> np.ndarray:
        out = np.zeros(self.end - self.start, dtype=self.coeffs.dtype if len(self.coeffs) else float)
        out[self.indices - self.start - 1] = self.coeffs
        return out

    def as_dict(self) -> dict:
        return dict(zip(self.indices.tolist(), self.coeffs.tolist()))


def eval_poly(v: CoeffVector, t) -> complex | np.ndarray:
    """``sum_n a_n n^{-1-it}`` by direct summation (scalar or array ``t``)."""
    ts = np.atleast_1d(np.asarray(t, dtype=np.float64))
    if len(v) == 0:
        out = np.zeros(len(ts), dtype=complex)
    else:
        logn = np.log(v.indices.astype(np.float64))
        w = v.coeffs / v.indices.astype(np.float64)
        out = np.array([np.sum(w * np.exp(-1j * tt * logn)) for tt in ts])
    return complex(out[0]) if np.ndim(t) == 0 else out


# ---------------------------------------------------------------------------
# B and the factorisation
# ---------------------------------------------------------------------------


def _table(lo: int, hi: int, primes: PrimeTable | None) -> IntervalFactorTable:
    """Factor table of ``(lo, hi]``."""
    if primes is None:
        primes = load_primes(math.isqrt(hi))
    return sieve_interval(lo, hi - lo, primes)


def build_B(X: int, config: SConfig, predicate: IntegerSet, primes: PrimeTable | None = None) -> CoeffVector:
    """Indicator coefficients of ``A ∩ S`` on ``(X, 2X]``."""
    X = int(X)
    t = _table(X, 2 * X, primes)
    mask = predicate.mask(t) & member_mask(t, config)
    return CoeffVector.from_dense(X, mask.astype(np.float64), 1.0)


def quotient_set(X: int, config: SConfig, predicate: IntegerSet, include_infinity: bool = False,
                 primes: PrimeTable | None = None) -> np.ndarray:
    """``A'``: all ``n/q`` for ``n ∈ A ∩ S ∩ [X, 2X]`` and window primes ``q | n``.

    Windows are the finite layers, plus the layer at infinity when
    ``include_infinity`` is set.
    """
    X = int(X)
    t = _table(X - 1, 2 * X, primes)
    ok = predicate.mask(t) & member_mask(t, config)
    rows = t.factor_rows()
    fp = t.factor_primes
    windows = list(config.layers) + ([config.infinity] if include_infinity and config.infinity else [])
    sel = np.zeros(len(fp), dtype=bool)
    for L in windows:
        sel |= (fp > L.P) & (fp <= L.Q)
    sel &= ok[rows]
    n = rows[sel] + X
    return np.unique(n // fp[sel])


def _m_bounds(X: int, v: np.ndarray | int, H: float) -> tuple:
    """``(X e^{-v/H}, 2X e^{-v/H})``; the same floats are used by every route."""
    e = np.exp(-np.asarray(v, dtype=np.float64) / H)
    return X * e, 2 * X * e


@dataclass(frozen=True, eq=False)
class FactorizationPieces:
    """The pieces ``Q_v``, ``R_v`` and the residual ``N`` for one layer.

    Attributes:
        scale: Common denominator ``L``; ``R`` weights are ``w / L`` with
            integer ``w``, so all coefficient checks are exact.
        product_coeffs: Exact scaled coefficients of ``sum_v Q_v R_v`` on
            ``(X, top]`` computed by multiplying the pieces out.
        count_coeffs: The same coefficients computed from the divisors of
            each ``n`` (the decomposition count route).
    """

    X: int
    j: int | str
    layer: Layer
    vs: np.ndarray
    Q: dict
    R: dict
    N: CoeffVector
    B: CoeffVector
    top: int
    scale: int
    product_coeffs: np.ndarray
    count_coeffs: np.ndarray
    in_AS: np.ndarray
    stats: dict = field(default_factory=dict)


def build_factorization(X: int, config: SConfig, predicate: IntegerSet, j, *,
                        primes: PrimeTable | None = None) -> FactorizationPieces:
    """Factor ``B`` along layer ``j`` (an index ``1..J`` or ``"inf"``).

    Raises:
        IndexError: if ``j`` is not a layer of ``config``.
    """
    X = int(X)
    layer = config.layer(j)
    H = layer.H
    top = int(math.floor(2 * X * math.exp(1.0 / H)))
    need = max(math.isqrt(top), int(min(layer.Q, top)))
    if primes is None or primes.limit < need:
        primes = load_primes(need)
    is_inf = layer.is_infinity
    A_prime = quotient_set(X, config, predicate, include_infinity=is_inf, primes=primes)
    scale = math.lcm(*range(1, max_omega_upto(top) + 2))

    # table over (X, top] supplies B, A ∩ S and the decomposition-count route
    tn = _table(X, top, primes)
    in_AS = predicate.mask(tn) & member_mask(tn, config)
    B = CoeffVector.from_dense(X, in_AS[: X].astype(np.float64), 1.0)
    count = _count_route(tn, X, layer, A_prime, scale)

    # pieces Q_v and R_v, then multiply them out
    wp = primes.between(layer.P, min(layer.Q, top))
    wv = subwindow_index(wp, H)
    lo, hi = layer.I
    keep = (wv >= lo) & (wv <= hi)
    wp, wv = wp[keep], wv[keep]
    vs = np.unique(wv)
    m_lo_all, m_hi_all = _m_bounds(X, vs, H)
    m_min = int(math.floor(m_lo_all.min())) if len(vs) else 0
    m_max = int(math.floor(m_hi_all.max())) if len(vs) else 0
    tm = _table(m_min, max(m_max, m_min + 1), primes)
    m_numbers = tm.numbers
    in_Aprime = np.isin(m_numbers, A_prime)
    rows = tm.factor_rows()
    fp = tm.factor_primes
    win = (fp > layer.P) & (fp <= layer.Q)
    omega_w = np.bincount(rows[win], minlength=tm.y)
    # subwindow indices of each m's window primes
    m_rows_w, m_v_w = rows[win], subwindow_index(fp[win], H)

    product = np.zeros(top - X, dtype=np.int64)
    Qd, Rd = {}, {}
    below, above = 0, 0
    for v, mlo, mhi in zip(vs.tolist(), m_lo_all.tolist(), m_hi_all.tolist()):
        qp = wp[wv == v]
        in_range = (m_numbers > mlo) & (m_numbers <= mhi) & in_Aprime
        blocked = np.zeros(tm.y, dtype=bool)
        blocked[m_rows_w[m_v_w == v]] = True
        sel = in_range & ~blocked
        ms = m_numbers[sel]
        w = scale // (omega_w[sel] + 1)
        Qd[v] = CoeffVector(int(qp.min()) - 1, int(qp.max()), qp, np.ones(len(qp)), 1.0) if len(qp) else None
        Rd[v] = CoeffVector(int(math.floor(mlo)), int(math.floor(mhi)), ms, w / scale, 1.0) if len(ms) else None
        if len(qp) == 0 or len(ms) == 0:
            continue
        n = np.multiply.outer(ms, qp).ravel()
        ww = np.repeat(w, len(qp))
        inside = (n > X) & (n <= top)
        below += int(np.count_nonzero(n <= X))
        above += int(np.count_nonzero(n > top))
        np.add.at(product, n[inside] - X - 1, ww[inside])
    Qd = {v: q for v, q in Qd.items() if q is not None}
    Rd = {v: r for v, r in Rd.items() if r is not None}

    # residual: B - (sum Q R) using the decomposition count route
    b_scaled = np.zeros(top - X, dtype=np.int64)
    b_scaled[B.indices - X - 1] = scale
    resid_scaled = b_scaled - count
    N_dense = resid_scaled / scale
    N = CoeffVector.from_dense(X, N_dense, max(1.0, float(np.max(np.abs(N_dense), initial=0.0))))

    ns = np.arange(X + 1, top + 1)
    lower_strip = ns <= X * math.exp(1.0 / H)
    upper = ns > 2 * X
    nz = resid_scaled != 0
    interior = (ns <= 2 * X) & in_AS & (count != scale)
    stats = {
        "X": X,
        "layer": str(layer.index),
        "H": H,
        "top": top,
        "scale": scale,
        "subwindows": int(len(vs)),
        "size_B": int(len(B)),
        "size_A_prime": int(len(A_prime)),
        "route_mismatches": int(np.count_nonzero(product != count)),
        "identity_mismatches": int(np.count_nonzero(b_scaled != product + resid_scaled)),
        "products_at_or_below_X": below,
        "products_above_top": above,
        "products_outside_AS": int(np.count_nonzero((product != 0) & ~in_AS)),
        "interior_defects": int(np.count_nonzero(interior)),
        "interior_defects_outside_lower_strip": int(np.count_nonzero(interior & ~lower_strip)),
        "N_support_upper": int(np.count_nonzero(nz & upper)),
        "N_support_lower_strip": int(np.count_nonzero(nz & lower_strip)),
        "N_support_elsewhere": int(np.count_nonzero(nz & ~upper & ~lower_strip)),
        "N_max_abs": float(np.max(np.abs(N_dense), initial=0.0)),
    }
    return FactorizationPieces(X, j if not is_inf else INF_INDEX, layer, vs, Qd, Rd, N, B, top, scale,
                               product, count, in_AS, stats)


def _count_route(tn: IntervalFactorTable, X: int, layer: Layer, A_prime: np.ndarray, scale: int) -> np.ndarray:
    """Scaled coefficient of each ``n`` in ``sum_v Q_v R_v`` from the divisors of ``n``.

    A decomposition ``n = m p`` is valid when ``p`` is a window prime with
    ``p || n``, no other window prime of ``n`` shares its subwindow,
    ``m ∈ A'`` and ``X e^{-v/H} < m <= 2X e^{-v/H}``.  It contributes
    ``1/(omega_window(m) + 1) = 1/omega_window(n)``.
    """
    rows = tn.factor_rows()
    fp = tn.factor_primes
    fe = tn.factor_exponents
    win = (fp > layer.P) & (fp <= layer.Q)
    r, p, e = rows[win], fp[win], fe[win]
    v = subwindow_index(p, layer.H)
    lo, hi = layer.I
    omega_n = np.bincount(r, minlength=tn.y)
    # number of window prime factors of n sharing each (row, v)
    width = hi - lo + 3
    key = r * width + (np.clip(v, lo - 1, hi + 1) - lo + 1)
    uniq, inv, cnt = np.unique(key, return_inverse=True, return_counts=True)
    alone = cnt[inv] == 1
    n = r + X + 1
    m = n // p
    mlo, mhi = _m_bounds(X, v, layer.H)
    ok = (e == 1) & alone & (v >= lo) & (v <= hi) & (m > mlo) & (m <= mhi) & np.isin(m, A_prime)
    out = np.zeros(tn.y, dtype=np.int64)
    # omega_window(m) + 1 = omega_window(n) for a valid decomposition
    np.add.at(out, r[ok], scale // omega_n[r[ok]])
    return out


def evaluated_identity_residual(pieces: FactorizationPieces, ts: Sequence[float]) -> np.ndarray:
    """``|B(1+it) - sum_v Q_v(1+it) R_v(1+it) - N(1+it)|`` at each ``t``."""
    ts = np.asarray(ts, dtype=np.float64)
    total = eval_poly(pieces.B, ts) - eval_poly(pieces.N, ts)
    for v, q in pieces.Q.items():
        r = pieces.R.get(v)
        if r is not None:
            total = total - eval_poly(q, ts) * eval_poly(r, ts)
    return np.abs(total)


# ---------------------------------------------------------------------------
# mean-value diagnostics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MVTReport:
    integral: float
    mvt_bound: float
    imvt_bound: float
    T: float
    quad_step: float
    intervals: int

    @property
    def ratio_mvt(self) -> float:
        return self.integral / self.mvt_bound if self.mvt_bound else math.nan

    @property
    def ratio_imvt(self) -> float:
        return self.integral / self.imvt_bound if self.imvt_bound else math.nan

    def as_dict(self) -> dict:
        return {"integral": self.integral, "mvt_bound": self.mvt_bound, "imvt_bound": self.imvt_bound,
                "ratio_mvt": self.ratio_mvt, "ratio_imvt": self.ratio_imvt}


def _pairwise_sum(x: np.ndarray) -> float:
    return float(np.add.reduce(x))


def simpson_integral(v: CoeffVector, T: float, quad_step: float) -> tuple[float, int]:
    """Composite Simpson rule for ``int_{-T}^{T} |A(1+it)|^2 dt`` (even interval count)."""
    m = max(2, int(math.ceil(2 * T / quad_step)))
    m += m % 2
    ts = np.linspace(-T, T, m + 1)
    f = np.abs(eval_poly(v, ts)) ** 2 if len(v) else np.zeros(m + 1)
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return _pairwise_sum(w * f) * (2 * T / m) / 3.0, m


def mvt_brackets(v: CoeffVector, T: float) -> tuple[float, float]:
    """``((T/X + 1)(1/X) sum |a_n|^2,  T (sum |a_n|^2/n^2 + sum_{1<=b<=X'/T} sum_n |a_n a_{n+b}|/(n(n+b))))``."""
    if len(v) == 0:
        return 0.0, 0.0
    X = max(v.start, 1)
    Xp = v.end
    a2 = np.abs(v.coeffs) ** 2
    mvt = (T / X + 1.0) / X * _pairwise_sum(a2)
    dense = np.zeros(Xp - v.start)
    dense[v.indices - v.start - 1] = np.abs(v.coeffs) / v.indices.astype(np.float64)
    diag = _pairwise_sum(dense**2)
    off = 0.0
    for b in range(1, min(int(Xp // T), len(dense) - 1) + 1):
        off += _pairwise_sum(dense[:-b] * dense[b:])
    return mvt, T * (diag + off)


def mvt_report(v: CoeffVector, T: float, quad_step: float = 0.05) -> MVTReport:
    """Integral of ``|A(1+it)|^2`` over ``[-T, T]`` and both mean-value brackets."""
    if not T > 0:
        raise DomainError("T must be positive")
    if not 0 < quad_step <= 0.1:
        raise DomainError("quad_step must lie in (0, 0.1]")
    integral, m = simpson_integral(v, T, quad_step)
    mvt, imvt = mvt_brackets(v, T)
    return MVTReport(integral, mvt, imvt, T, quad_step, m)


def write_trace_csv(path, v: CoeffVector, ts) -> None:
    vals = eval_poly(v, np.asarray(ts, dtype=np.float64))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "re", "im", "modulus"])
        for t, z in zip(np.atleast_1d(ts), np.atleast_1d(vals)):
            w.writerow([repr(float(t)), repr(float(z.real)), repr(float(z.imag)), repr(float(abs(z)))])


# ---------------------------------------------------------------------------
# Parseval-type mean square of short-window averages
# ---------------------------------------------------------------------------


def parseval_lhs(X: float, h: float, y0: float, a) -> float:
    """``(1/X) int_X^{2X} |(1/h) sum_{x<n<=x+h} a_n - (1/y0) sum_{x<n<=x+y0} a_n|^2 dx``.

    ``a`` is either an ``IntegerSet`` or a callable returning the array of
    ``a_n`` for ``n = lo+1..hi`` given ``(lo, hi)``.  ``X`` must be an
    integer; ``h`` and ``y0`` may be real.  Both window sums are step
    functions of ``x``, so the integral is evaluated exactly piece by piece.
    """
    if not 0 < h <= y0 <= X:
        raise DomainError("need 0 < h <= y0 <= X")
    X = int(X)
    if X < 1:
        raise DomainError("X must be a positive integer")
    hi = int(math.floor(2 * X + y0)) + 1
    if isinstance(a, IntegerSet):
        t = _table(X, hi, None)
        an = a.mask(t).astype(np.float64)
    else:
        an = np.asarray(a(X, hi), dtype=np.float64)
    # A[i] = sum_{X < n <= X + i} a_n
    A = np.concatenate(([0.0], np.cumsum(an)))
    k = np.arange(X, 2 * X)  # x in [k, k+1)
    base = k - X

    def piece_sums(length):
        L = math.floor(length)
        fr = length - L
        # for x in [k, k + 1 - fr): upper end k + L; afterwards k + L + 1
        return fr, A[base + L] - A[base], A[base + L + 1] - A[base]

    fh, sh0, sh1 = piece_sums(h)
    fy, sy0, sy1 = piece_sums(y0)
    cut = sorted({0.0, 1.0 - fh if fh else 1.0, 1.0 - fy if fy else 1.0, 1.0})
    total = 0.0
    for a0, a1 in zip(cut, cut[1:]):
        if a1 <= a0:
            continue
        mid = 0.5 * (a0 + a1)
        Sh = sh0 if (not fh or mid < 1.0 - fh) else sh1
        Sy = sy0 if (not fy or mid < 1.0 - fy) else sy1
        total += (a1 - a0) * _pairwise_sum((Sh / h - Sy / y0) ** 2)
    return total / X
