"""The structured set S: layered prime windows and membership tests.

An integer ``n`` lies in the layer set ``S_j`` attached to a window
``]P_j, Q_j]`` with fineness ``H_j`` when

* ``n`` has at least one prime factor in ``]P_j, Q_j]``,
* no prime of the window divides ``n`` twice, and
* no two prime factors of ``n`` from the window share a subwindow
  ``(e^{v/H_j}, e^{(v+1)/H_j}]``.

``S`` is the intersection of the finite layers and the layer at infinity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DomainError, InfeasibleConfigError
from .sieve import FactorEntry, IntegerSet, IntervalFactorTable, PrimeTable, load_primes, sieve_interval

INF_INDEX = "inf"
_SERIAL_KEYS = ("mode", "X", "eps", "r", "h", "K", "delta", "theta", "J")


def subwindow_index(p, H: float) -> np.ndarray:
    """Index ``v`` with ``e^{v/H} < p <= e^{(v+1)/H}``, i.e. ``ceil(H log p) - 1``."""
    return np.ceil(H * np.log(np.asarray(p, dtype=np.float64))).astype(np.int64) - 1


@dataclass(frozen=True)
class Layer:
    """One prime window ``]P, Q]`` with subwindow fineness ``H``."""

    index: int | str
    P: float
    Q: float
    H: float

    @property
    def is_infinity(self) -> bool:
        return self.index == INF_INDEX

    @property
    def logP(self) -> float:
        return math.log(self.P)

    @property
    def logQ(self) -> float:
        return math.log(self.Q)

    @property
    def I(self) -> tuple[int, int]:
        """Integer range ``[floor(H log P), H log Q]`` of subwindow indices (inclusive)."""
        return math.floor(self.H * self.logP), math.floor(self.H * self.logQ)

    def complement_term(self, r: float) -> float:
        """``(log P / log Q)^r + 1/P + log(1 + log Q / log P) / H``."""
        ratio = self.logP / self.logQ
        return ratio**r + 1.0 / self.P + math.log1p(self.logQ / self.logP) / self.H


@dataclass(frozen=True)
class SConfig:
    """Full parameter set defining S.

    Attributes:
        mode: ``"paper"``, ``"small_k"`` or ``"manual"``.
        layers: Finite layers ``j = 1..J`` in increasing order.
        infinity: The layer at infinity, or ``None`` when absent.
        violations: Constraints found violated while building (empty if feasible).
    """

    mode: str
    X: float
    layers: tuple = ()
    infinity: Layer | None = None
    eps: float | None = None
    r: float = 1.0
    h: float | None = None
    K: float | None = None
    delta: float | None = None
    theta: float | None = None
    J: int = 0
    violations: tuple = field(default=())

    @property
    def all_layers(self) -> tuple:
        return self.layers + ((self.infinity,) if self.infinity is not None else ())

    @property
    def feasible(self) -> bool:
        return not self.violations

    def layer(self, j) -> Layer:
        if j == INF_INDEX or j == math.inf:
            if self.infinity is None:
                raise IndexError("configuration has no layer at infinity")
            return self.infinity
        if not 1 <= j <= len(self.layers):
            raise IndexError(f"layer index {j} out of range 1..{len(self.layers)}")
        return self.layers[j - 1]

    def require_feasible(self) -> "SConfig":
        if self.violations:
            raise InfeasibleConfigError(self.violations, self)
        return self

    def to_text(self) -> str:
        return config_to_text(self)

    def save(self, path) -> None:
        Path(path).write_text(config_to_text(self))


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def _num(v) -> str:
    """Short text for a possibly huge integer bound."""
    try:
        return f"{float(v):.6g}"
    except OverflowError:
        return f"e^{math.log(v):.6g}"


def _ordering_violations(layers: Sequence[Layer]) -> list[str]:
    out = []
    for L in layers:
        if not L.P < L.Q:
            out.append(f"layer {L.index}: need P < Q (P={_num(L.P)}, Q={_num(L.Q)})")
    for a, b in zip(layers, layers[1:]):
        if not a.Q < b.P:
            out.append(f"ordering: Q_{a.index}={_num(a.Q)} must be < P_{b.index}={_num(b.P)}")
    return out


def _size_violations(layers: Sequence[Layer]) -> list[str]:
    out = []
    for L in layers:
        for name, val in (("P", L.P), ("Q", L.Q), ("H", L.H)):
            if not val > 2:
                out.append(f"layer {L.index}: {name}={_num(val)} must exceed 2")
    return out


def _safe_exp(x: float) -> float:
    return math.exp(x) if x < 709.0 else math.inf


def build_config_paper(X, h, r, eps, delta, theta, K, P1, Pinf, Qinf, *, max_layers: int = 64) -> SConfig:
    """Layered configuration from the general recursion.

    ``Q_1 = min(delta theta h, e^K)``; for ``j >= 1``::

        log P_j = j^{4j/r} (log3 Q_1)^{2(j-1)} log P_1
        log Q_j = j^{(4j+2)/r} (log3 Q_1)^{2(j-1)} log Q_1
        H_j = j^2 min(P_1^{1/6 - eps} (log Q_1)^{-1/3}, theta (log2 Q_1)^2)

    with ``J`` the largest ``j`` such that ``Q_j <= e^K`` and
    ``H_inf = (log2 X)^2``.  Every violated constraint is recorded in
    ``violations``; nothing is clamped.
    """
    v: list[str] = []
    if not 0 < r <= 1:
        v.append(f"r={r} must lie in (0, 1]")
    if not 0 < eps <= 0.01:
        v.append(f"eps={eps} must lie in (0, 1/100]")
    if not (0 < delta <= 1 <= theta <= 1 / delta):
        v.append(f"need 0 < delta <= 1 <= theta <= 1/delta (delta={delta}, theta={theta})")
    if not 3 <= h <= X:
        v.append(f"need 3 <= h <= X (h={h})")
    lX = math.log(X)
    l2X = math.log(lX)
    if not l2X**2 <= K <= math.sqrt(lX):
        v.append(f"need (log2 X)^2 <= K <= sqrt(log X): {l2X**2:.6g} <= {K:.6g} <= {math.sqrt(lX):.6g}")
    logQ1 = min(math.log(delta * theta * h), K)
    if logQ1 <= 0 or math.log(logQ1) <= 0:
        v.append(f"log3 Q1 undefined (log Q1 = {logQ1:.6g})")
        return SConfig("paper", X, (), None, eps, r, h, K, delta, theta, 0, tuple(v))
    l2Q1 = math.log(logQ1)
    l3Q1 = math.log(l2Q1) if l2Q1 > 0 else -math.inf
    if not l3Q1 > 0:
        v.append(f"log3 Q1 = {l3Q1:.6g} must be positive")
    logP1 = math.log(P1)
    if l3Q1 > 0:
        lower = logQ1 / l3Q1
        if not math.log(20) <= lower <= logP1 <= logQ1:
            v.append(f"need 20 <= Q1^(1/log3 Q1) <= P1 <= Q1 "
                     f"(Q1^(1/log3 Q1)={_safe_exp(lower):.6g}, P1={_num(P1)}, Q1={_safe_exp(logQ1):.6g})")
    elif not logP1 <= logQ1:
        v.append("need P1 <= Q1")
    lpi, lqi = math.log(Pinf), math.log(Qinf)
    if not lX ** (2 / 3 + eps) <= lpi <= lqi <= lX ** (1 - eps):
        v.append(f"need exp((log X)^(2/3+eps)) <= Pinf <= Qinf <= exp((log X)^(1-eps)) "
                 f"(log bounds {lX ** (2 / 3 + eps):.6g}, {lX ** (1 - eps):.6g}; got {lpi:.6g}, {lqi:.6g})")
    base_h = min(P1 ** (1 / 6 - eps) * logQ1 ** (-1 / 3), theta * l2Q1**2)
    layers = []
    for j in range(1, max_layers + 1):
        lp, lq = paper_layer_logs(j, r, l3Q1, logP1, logQ1)
        if not lq <= K:
            break
        layers.append(Layer(j, _safe_exp(lp), _safe_exp(lq), j * j * base_h))
    J = len(layers)
    if J == 0:
        v.append("no layer satisfies Q_j <= e^K")
    inf_layer = Layer(INF_INDEX, Pinf, Qinf, l2X**2)
    allL = layers + [inf_layer]
    v.extend(_size_violations(allL))
    if not K > 2:
        v.append(f"K={K} must exceed 2")
    v.extend(_ordering_violations(allL))
    return SConfig("paper", X, tuple(layers), inf_layer, eps, r, h, K, delta, theta, J, tuple(v))


def paper_layer_logs(j: int, r: float, l3Q1: float, logP1: float, logQ1: float) -> tuple[float, float]:
    """``(log P_j, log Q_j)`` from the recursion."""
    g = l3Q1 ** (2 * (j - 1))
    return j ** (4 * j / r) * g * logP1, j ** ((4 * j + 2) / r) * g * logQ1


def build_config_smallk(X, eps) -> SConfig:
    """Fixed three-layer configuration for small ``k``, plus the layer at infinity.

    ``P_1 = (log3 X)^{2+100 eps}``, ``Q_1 = P_1^{1+eps}``,
    ``P_2 = (log2 X)^{1/eps}``, ``Q_2 = P_2^{1+eps}``,
    ``P_3 = (log X)^{1/eps}``, ``Q_3 = exp((log2 X)^2)``,
    ``P_inf = exp((log X)^{2/3+eps})``, ``Q_inf = exp((log X)^{2/3+2 eps})``,
    and ``H_i = (log2 Q_i)^2``.

    Raises:
        DomainError: if ``log3 X <= 1``.
    """
    lX = math.log(X)
    l2X = math.log(lX)
    if l2X <= 1 or math.log(l2X) <= 1:
        raise DomainError("small-k preset needs log3 X > 1")
    l3X = math.log(l2X)
    if not 0 < eps <= 0.01:
        raise DomainError("eps must lie in (0, 1/100]")
    logs = [
        ((2 + 100 * eps) * math.log(l3X), (1 + eps) * (2 + 100 * eps) * math.log(l3X)),
        (math.log(l2X) / eps, (1 + eps) * math.log(l2X) / eps),
        (math.log(lX) / eps, l2X**2),
    ]
    inf_logs = (lX ** (2 / 3 + eps), lX ** (2 / 3 + 2 * eps))

    def H_of(lq):
        return math.log(lq) ** 2 if lq > 0 else math.nan

    layers = tuple(Layer(j, _safe_exp(lp), _safe_exp(lq), H_of(lq)) for j, (lp, lq) in enumerate(logs, 1))
    inf_layer = Layer(INF_INDEX, _safe_exp(inf_logs[0]), _safe_exp(inf_logs[1]), H_of(inf_logs[1]))
    allL = list(layers) + [inf_layer]
    v = _size_violations(allL) + _ordering_violations(allL)
    return SConfig("small_k", X, layers, inf_layer, eps, 1.0, None, None, None, None, 3, tuple(v))


def build_config_manual(layers, X, infinity=None, *, r: float = 1.0) -> SConfig:
    """Configuration from directly chosen layers ``[(P, Q, H), ...]``.

    Raises:
        InfeasibleConfigError: on an empty configuration, ``P < 2``,
            ``H < 2`` or overlapping / unordered windows.
    """
    L = [Layer(j, float(P), float(Q), float(H)) for j, (P, Q, H) in enumerate(layers, 1)]
    inf_layer = Layer(INF_INDEX, *map(float, infinity)) if infinity is not None else None
    allL = L + ([inf_layer] if inf_layer is not None else [])
    if not allL:
        raise InfeasibleConfigError(["empty layer list"])
    problems = _ordering_violations(allL)
    for lay in allL:
        if not lay.P >= 2 or not lay.H >= 2:
            problems.append(f"layer {lay.index}: need P >= 2 and H >= 2")
    if problems:
        raise InfeasibleConfigError(problems)
    return SConfig("manual", X, tuple(L), inf_layer, None, r, None, None, None, None, len(L), ())


def trivial_config(X) -> SConfig:
    """No layers at all: every integer is in S."""
    return SConfig("manual", X)


# ---------------------------------------------------------------------------
# membership
# ---------------------------------------------------------------------------


def is_member_layer(entry: FactorEntry, j, config: SConfig) -> bool:
    """Membership of one fully factored integer in the layer set ``S_j``."""
    return _entry_in_layer(entry, config.layer(j))


def _entry_in_layer(entry: FactorEntry, layer: Layer) -> bool:
    inside = [(p, e) for p, e in entry.factors if layer.P < p <= layer.Q]
    if not inside:
        return False
    if any(e >= 2 for _, e in inside):
        return False
    v = subwindow_index([p for p, _ in inside], layer.H)
    lo, hi = layer.I
    seen = set()
    for vi in v.tolist():
        if lo <= vi <= hi:
            if vi in seen:
                return False
            seen.add(vi)
    return True


def is_member_S(entry: FactorEntry, config: SConfig) -> bool:
    return all(_entry_in_layer(entry, L) for L in config.all_layers)


def layer_mask(table: IntervalFactorTable, layer: Layer) -> np.ndarray:
    """Vectorised ``S_j`` membership for every entry of ``table``."""
    fp = table.factor_primes
    rows = table.factor_rows()
    sel = (fp > layer.P) & (fp <= layer.Q)
    r_in, p_in, e_in = rows[sel], fp[sel], table.factor_exponents[sel]
    has = np.bincount(r_in, minlength=table.y) > 0
    squared = np.bincount(r_in[e_in >= 2], minlength=table.y) > 0
    v = subwindow_index(p_in, layer.H)
    lo, hi = layer.I
    keep = (v >= lo) & (v <= hi)
    r_k, v_k = r_in[keep], v[keep]
    clash = np.zeros(table.y, dtype=bool)
    if len(r_k) > 1:
        order = np.lexsort((v_k, r_k))
        rs, vs = r_k[order], v_k[order]
        dup = (rs[1:] == rs[:-1]) & (vs[1:] == vs[:-1])
        clash[rs[1:][dup]] = True
    return has & ~squared & ~clash


def member_mask(table: IntervalFactorTable, config: SConfig) -> np.ndarray:
    mask = np.ones(table.y, dtype=bool)
    for L in config.all_layers:
        mask &= layer_mask(table, L)
    return mask


def complement_rhs(X, config: SConfig) -> float:
    """``X * sum_j ((log P_j/log Q_j)^r + 1/P_j + log(1 + log Q_j/log P_j)/H_j)`` over all layers."""
    return float(X) * math.fsum(L.complement_term(config.r) for L in config.all_layers)


@dataclass(frozen=True)
class ComplementMeasure:
    count_A: int
    count_A_minus_S: int
    bound_rhs: float

    def __iter__(self):
        return iter((self.count_A, self.count_A_minus_S, self.bound_rhs))


def measure_complement(X: int, config: SConfig, predicate: IntegerSet, *,
                       primes: PrimeTable | None = None, block: int = 1 << 20,
                       threads: int = 1) -> ComplementMeasure:
    """Count ``A`` and ``A \\ S`` on ``[X, 2X]`` (both ends included)."""
    X = int(X)
    if X < 1:
        raise DomainError("X must be >= 1")
    if primes is None:
        primes = load_primes(math.isqrt(2 * X))
    nA = nAS = 0
    start = X - 1
    end = 2 * X
    while start < end:
        y = min(block, end - start)
        t = sieve_interval(start, y, primes, threads=threads)
        a = predicate.mask(t)
        nA += int(np.count_nonzero(a))
        if np.any(a):
            nAS += int(np.count_nonzero(a & ~member_mask(t, config)))
        start += y
    return ComplementMeasure(nA, nAS, complement_rhs(X, config))


# ---------------------------------------------------------------------------
# text serialisation
# ---------------------------------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return "none"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def config_to_text(c: SConfig) -> str:
    """``key = value`` lines, then ``layer <j|inf> P Q H`` rows and ``violation = ...`` lines."""
    lines = ["# omegalab S-set configuration"]
    for k in _SERIAL_KEYS:
        lines.append(f"{k} = {_fmt(getattr(c, k))}")
    for L in c.all_layers:
        lines.append(f"layer {L.index} {repr(float(L.P))} {repr(float(L.Q))} {repr(float(L.H))}")
    for msg in c.violations:
        lines.append(f"violation = {msg}")
    return "\n".join(lines) + "\n"


def _parse_value(key: str, text: str):
    if text == "none":
        return None
    if key == "mode":
        return text
    if key == "J":
        return int(text)
    return float(text)


def config_from_text(text: str) -> SConfig:
    vals: dict = {}
    layers, inf_layer, violations = [], None, []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("layer "):
            _, idx, P, Q, H = line.split()
            lay = Layer(INF_INDEX if idx == INF_INDEX else int(idx), float(P), float(Q), float(H))
            if lay.is_infinity:
                inf_layer = lay
            else:
                layers.append(lay)
            continue
        key, _, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if key == "violation":
            violations.append(value)
        elif key in _SERIAL_KEYS:
            vals[key] = _parse_value(key, value)
        else:
            raise ValueError(f"unknown configuration key {key!r}")
    if "mode" not in vals or "X" not in vals:
        raise ValueError("configuration needs at least mode and X")
    if vals.get("r") is None:
        vals["r"] = 1.0
    vals.setdefault("J", len(layers))
    return SConfig(layers=tuple(sorted(layers, key=lambda L: L.index)), infinity=inf_layer,
                   violations=tuple(violations), **vals)


def load_config(path) -> SConfig:
    return config_from_text(Path(path).read_text())


def with_layers(config: SConfig, layers) -> SConfig:
    return replace(config, layers=tuple(layers), J=len(layers))
