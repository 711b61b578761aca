"""Experiment drivers.

Every driver takes an ``ExperimentSpec`` and returns an ``ExperimentReport``.
Sampled kinds draw their starting points from a seeded PCG64 stream,
evaluate them in a thread pool and keep the results in sample order.  A
second stream spawned from the same seed chooses the samples that are
recounted through the trial-division route of ``audit``.
"""

from __future__ import annotations

import functools
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Callable

import numpy as np

from ..dirichletpoly import CoeffVector, build_factorization, evaluated_identity_residual, mvt_report
from ..errors import DegenerateFormsError, DomainError, ToleranceError
from ..sieve import (
    LinearForm,
    count_joint,
    count_pik,
    load_primes,
    max_omega_upto,
    parse_integer_set,
    sieve_interval,
)
from ..specialfn import F_k, delta_k, dickman_build
from ..sset import INF_INDEX, build_config_manual, build_config_smallk, member_mask, trivial_config
from . import audit
from .report import ExperimentReport, SampleRecord, summarize
from .spec import ExperimentSpec

RNG_ALGORITHM = "PCG64"
FACTO_TOLERANCE = 1e-9
CLOSED_FORM_TOLERANCE = 1e-8


@dataclass(frozen=True)
class RunOptions:
    """Execution settings that must not change any result.

    Attributes:
        threads: Size of the sample-evaluation pool.
        cache_dir: Directory of the on-disk prime cache, or ``None``.
        audit: Number of samples recounted by trial division.
    """

    threads: int = 1
    cache_dir: str | None = None
    audit: int = 5


def rng_streams(seed: int) -> tuple[np.random.Generator, np.random.Generator]:
    """``(sample stream, audit stream)`` spawned from one seed."""
    children = np.random.SeedSequence(int(seed)).spawn(2)
    return tuple(np.random.Generator(np.random.PCG64(c)) for c in children)


def rng_info(seed: int) -> dict:
    return {
        "algorithm": RNG_ALGORITHM,
        "seed": int(seed),
        "seeding": "SeedSequence(seed).spawn(2) -> [samples, audit]",
        "sampler": "Generator.integers, bounded with rejection",
    }


def sample_starts(spec: ExperimentSpec, length: int) -> np.ndarray:
    """Uniform starting points ``x`` in ``[X, 2X - length]``.

    When ``length = X`` the range is the single point ``X`` and one sample is
    returned.

    Raises:
        DomainError: if ``length > X`` (infeasible interval).
    """
    X = spec.X
    hi = 2 * X - length
    if hi < X:
        raise DomainError(f"infeasible interval: length {length} exceeds X = {X}")
    if hi == X:
        return np.array([X], dtype=np.int64)
    rng, _ = rng_streams(spec.seed)
    return rng.integers(X, hi, size=spec.samples, endpoint=True, dtype=np.int64)


def _pool_map(fn: Callable, items: list, threads: int) -> list:
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(i) for i in items]


def _primes(opts: RunOptions, top: int):
    return load_primes(math.isqrt(int(top)), opts.cache_dir)


def _audit(spec: ExperimentSpec, opts: RunOptions, records: list, recount: Callable) -> dict:
    """Recount ``opts.audit`` randomly chosen records; ``recount(record)`` returns the count."""
    n = min(opts.audit, len(records))
    if n == 0:
        return {"indices": [], "mismatches": [], "passed": True}
    _, rng = rng_streams(spec.seed)
    idx = sorted(rng.choice(len(records), size=n, replace=False).tolist())
    bad = [i for i in idx if recount(records[i]) != records[i].observed]
    return {"indices": idx, "mismatches": bad, "passed": not bad}


@functools.lru_cache(maxsize=8)
def _dickman(umax: int):
    return dickman_build(umax=float(umax))


# ---------------------------------------------------------------------------
# sampled short-interval kinds
# ---------------------------------------------------------------------------


def _sampled(spec: ExperimentSpec, opts: RunOptions, count: Callable, predicted: Callable,
             recount: Callable, extra: Callable | None = None) -> tuple[list, dict, list]:
    """Shared loop of the sampled kinds.

    Args:
        count: ``count(x, length)`` by the sieve route.
        predicted: ``predicted(length)``, independent of ``x``.
        recount: ``recount(x, length)`` by the audit route.
        extra: ``extra(xs, observed, predicted, length)`` returning more
            aggregate fields.

    Returns:
        ``(records, aggregate, trend rows)``.
    """
    lo, hi = spec.band_lo, spec.band_hi

    def one(length):
        xs = sample_starts(spec, length).tolist()
        obs = _pool_map(lambda x: count(x, length), xs, opts.threads)
        pred = float(predicted(length))
        if not pred > 0:
            raise DomainError(f"predicted value must be positive, got {pred}")
        ratios = np.asarray(obs, dtype=np.float64) / pred
        stats = summarize(ratios, lo, hi)
        if extra is not None:
            stats.update(extra(xs, obs, pred, length))
        return xs, obs, pred, ratios, stats

    length = spec.window_length
    xs, obs, pred, ratios, agg = one(length)
    records = [SampleRecord(i, int(x), int(o), pred, float(r))
               for i, (x, o, r) in enumerate(zip(xs, obs, ratios))]
    agg["audit"] = _audit(spec, opts, records, lambda rec: recount(rec.x, length))
    trend = []
    for h in spec.h_trend:
        stats = agg if h == length else one(h)[4]
        trend.append({"h": h, **{k: v for k, v in stats.items() if k != "audit"}})
    return records, agg, trend


def _finish(spec: ExperimentSpec, records: list, agg: dict, tables: dict | None = None,
            warnings: list | None = None) -> ExperimentReport:
    return ExperimentReport(spec.kind, spec.to_params(), records, agg, tables or {}, warnings or [],
                            rng_info(spec.seed))


def run_pik_short(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """Short-interval counts of ``omega(n) = k`` against ``delta_k(X) h``."""
    opts = opts or RunOptions()
    X, k, h = spec.X, spec.single_k, spec.window_length
    primes = _primes(opts, 2 * X)
    d = delta_k(X, k)
    warnings = []
    if d * h < 1:
        warnings.append(f"delta_k(X) h = {d * h:.3g} < 1: expected counts are below one")
    records, agg, trend = _sampled(
        spec, opts,
        count=lambda x, L: count_pik(x, L, k, primes),
        predicted=lambda L: d * L,
        recount=lambda x, L: audit.recount_pik(x, L, k, primes),
    )
    agg["delta_k"] = d
    agg["expected_count"] = d * h
    agg["degenerate"] = k > max_omega_upto(2 * X)
    return _finish(spec, records, agg, {"trend": trend} if trend else {}, warnings)


def run_pik_smallk(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """Counts for ``k >= 5`` against the floor ``delta_k(X) h / F_k(X)``."""
    opts = opts or RunOptions()
    X, k, h = spec.X, spec.single_k, spec.window_length
    primes = _primes(opts, 2 * X)
    d = delta_k(X, k)
    F = F_k(X, k)
    l3 = math.log(math.log(math.log(X)))

    def satisfied(xs, obs, pred, L):
        return {"satisfied_fraction": float(np.mean(np.asarray(obs) >= spec.c * pred))}

    records, agg, trend = _sampled(
        spec, opts,
        count=lambda x, L: count_pik(x, L, k, primes),
        predicted=lambda L: d * L / F,
        recount=lambda x, L: audit.recount_pik(x, L, k, primes),
        extra=satisfied,
    )
    lhs = F * l3 ** (2 + spec.eps)
    agg.update({"delta_k": d, "F_k": F, "floor": d * h / F, "threshold_lhs": lhs,
                "threshold_rhs": d * h, "threshold_satisfied": lhs <= d * h})
    warnings = [] if lhs <= d * h else ["threshold F_k(X)(log3 X)^(2+eps) <= delta_k(X) h fails"]
    return _finish(spec, records, agg, {"trend": trend} if trend else {}, warnings)


def _integer_root_floor(x: int, u: float) -> int:
    b = int(math.floor(math.exp(math.log(x) / u)))
    while b > 1 and float(b) ** u > x:
        b -= 1
    while float(b + 1) ** u <= x:
        b += 1
    return max(b, 1)


def run_friable_short(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """Short-interval counts of ``round(X^(1/u))``-friable integers against ``rho(u) h``.

    Besides the pinned ratio, the aggregate carries ``mean_ratio_local_u``:
    the mean of ``observed / (rho(log x / log B) h)``, which removes the drift
    of the effective exponent across ``[X, 2X]``.
    """
    opts = opts or RunOptions()
    X, u, h = spec.X, spec.u, spec.window_length
    B = int(round(math.exp(math.log(X) / u)))
    primes = _primes(opts, 2 * X)
    umax = max(2, math.ceil(math.log(2 * X) / math.log(max(B, 2)))) + 1
    table = _dickman(umax)
    rho = float(table.rho(u))
    agg_extra: dict = {"bound": B, "rho_u": rho}
    if u <= 2:
        err = abs(rho - (1.0 - math.log(u)))
        agg_extra["rho_closed_form_error"] = err
        if err > CLOSED_FORM_TOLERANCE:
            raise ToleranceError(f"rho({u}) differs from 1 - log u by {err:.3g}")

    def local(xs, obs, pred, L):
        if B < 2:
            return {}
        mids = np.asarray(xs, dtype=np.float64) + L / 2.0
        loc = table.rho(np.log(mids) / math.log(B))
        return {"mean_ratio_local_u": float(np.mean(np.asarray(obs) / (loc * L)))}

    records, agg, trend = _sampled(
        spec, opts,
        count=lambda x, L: int(np.count_nonzero(
            sieve_interval(x, L, primes, with_factors=False).largest_prime <= B)),
        predicted=lambda L: rho * L,
        recount=lambda x, L: audit.recount_friable(x, L, B, primes),
        extra=local,
    )
    agg.update(agg_extra)
    warnings = []
    if spec.psi is None:
        agg["admissible"] = None
        warnings.append("psi not supplied: admissibility (1 + 1/rho(u))^psi <= h not checked")
    else:
        agg["admissible"] = (1.0 + 1.0 / rho) ** spec.psi <= h
    return _finish(spec, records, agg, {"trend": trend} if trend else {}, warnings)


def run_friable_all(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """Deterministic grid scan of ``Psi(x + h sqrt(x), x^(1/u)) - Psi(x, x^(1/u))``.

    The ratio is taken against ``rho(u)^2 h sqrt(x) / (log x)^3``;
    ``min_rho_ratio`` is the minimum of ``observed / (rho(u) h sqrt(x))``,
    which is directly comparable with the friable_short mean ratio.
    """
    opts = opts or RunOptions()
    X, u, h = spec.X, spec.u, spec.window_length
    if h > math.isqrt(X):
        raise DomainError(f"h = {h} exceeds sqrt(x) at x = X")
    n = spec.samples
    xs = np.unique(np.rint(np.linspace(X, 2 * X, n)).astype(np.int64)).tolist()
    lengths = [math.isqrt(h * h * x) for x in xs]
    bounds = [_integer_root_floor(x, u) for x in xs]
    primes = _primes(opts, 2 * X + max(lengths))
    rho = float(_dickman(max(2, math.ceil(u)) + 1).rho(u))

    def count(i):
        t = sieve_interval(xs[i], lengths[i], primes, with_factors=False)
        return int(np.count_nonzero(t.largest_prime <= bounds[i]))

    obs = _pool_map(count, list(range(len(xs))), opts.threads)
    pred = [rho**2 * h * math.sqrt(x) / math.log(x) ** 3 for x in xs]
    records = [SampleRecord(i, x, o, p, o / p) for i, (x, o, p) in enumerate(zip(xs, obs, pred))]
    agg = summarize([r.ratio for r in records], spec.band_lo, spec.band_hi)
    agg["min_rho_ratio"] = min(o / (rho * h * math.sqrt(x)) for x, o in zip(xs, obs))
    agg["lower_bound_cleared"] = all(r.ratio >= 1 for r in records)
    agg["rho_u"] = rho
    by_x = {x: (L, B) for x, L, B in zip(xs, lengths, bounds)}
    agg["audit"] = _audit(spec, opts, records,
                          lambda rec: audit.recount_friable(rec.x, *by_x[rec.x], primes))
    rows = [{"x": x, "length": L, "bound": B} for x, L, B in zip(xs, lengths, bounds)]
    return _finish(spec, records, agg, {"grid": rows})


# ---------------------------------------------------------------------------
# exhaustive kinds
# ---------------------------------------------------------------------------


def _form_omega(a: int, b: int, X: int, primes, threads: int) -> np.ndarray:
    """``omega(a n + b)`` for ``n`` in ``(X, 2X]``."""
    lo, hi = a * (X + 1) + b, 2 * a * X + b
    t = sieve_interval(lo - 1, hi - lo + 1, primes, with_factors=False, threads=threads)
    return t.omega[:: a].astype(np.int64)


def _phi(n: int) -> int:
    out, m, p = n, n, 2
    while p * p <= m:
        if m % p == 0:
            out -= out // p
            while m % p == 0:
                m //= p
        p += 1
    return out - out // m if m > 1 else out


def run_correlation(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """Joint counts of ``omega(a1 n) = k1`` and ``omega(a2 n + b) = k2`` over ``(X, 2X]``.

    Each ``(b, k1, k2)`` cell is normalised by ``delta_k1(X) delta_k2(X) X``.
    The full table comes from one pair of sieves per shift; ``opts.audit``
    cells are recomputed through ``count_joint``.  A shift ``b = 0`` with
    ``a1 = a2 = 1`` makes the two forms coincide; it is handled as a sanity
    branch comparing the diagonal with single counts.
    """
    opts = opts or RunOptions()
    X, ks, a1, a2 = spec.X, sorted(set(spec.k)), spec.a1, spec.a2
    if min(ks) < 1:
        raise DomainError("correlation needs k >= 1")
    primes = _primes(opts, 2 * max(a1, a2) * X + max(spec.b))
    dens = {k: delta_k(X, k) for k in ks}
    linear = a1 * a2 / (_phi(a1) * _phi(a2))
    om1 = _form_omega(a1, 0, X, primes, opts.threads)
    kmax = max(ks) + 1
    cells, sanity = [], []
    for b in spec.b:
        if b == 0:
            if not a1 == a2 == 1:
                raise DegenerateFormsError("b = 0 makes a1*b2 - a2*b1 vanish")
            for k in ks:
                joint = count_joint(X, X, LinearForm(1, 0, k), LinearForm(1, 0, k), primes,
                                    allow_degenerate=True)
                single = count_pik(X, X, k, primes)
                sanity.append({"k": k, "joint": joint, "single": single, "equal": joint == single})
            continue
        if math.gcd(a2, b) != 1:
            raise DomainError(f"gcd(a2, b) = gcd({a2}, {b}) != 1")
        om2 = _form_omega(a2, b, X, primes, opts.threads)
        grid = np.zeros((kmax + 1, kmax + 1), dtype=np.int64)
        np.add.at(grid, (np.minimum(om1, kmax), np.minimum(om2, kmax)), 1)
        weight = (b / _phi(b)) ** spec.K1 if spec.K1 is not None else None
        for k1 in ks:
            for k2 in ks:
                cnt = int(grid[k1, k2])
                norm = dens[k1] * dens[k2] * X
                row = {"b": b, "k1": k1, "k2": k2, "count": cnt, "normalizer": norm, "ratio": cnt / norm}
                if linear != 1:
                    row["ratio_linear"] = cnt / (norm * linear)
                if weight is not None:
                    row["ratio_weighted"] = cnt / (norm * weight)
                cells.append(row)
    records = [SampleRecord(i, X, c["count"], c["normalizer"], c["ratio"]) for i, c in enumerate(cells)]
    if records:
        agg = summarize([r.ratio for r in records], spec.band_lo, spec.band_hi)
    else:
        agg = {"mean_ratio": math.nan, "median_ratio": math.nan, "exceptional_fraction": 0.0}
    by_b = {}
    for c in cells:
        best = by_b.get(c["b"])
        if best is None or c["ratio"] > best["ratio"]:
            by_b[c["b"]] = {"ratio": c["ratio"], "k1": c["k1"], "k2": c["k2"]}
    agg["max_ratio_by_b"] = {str(b): v for b, v in by_b.items()}
    agg["max_ratio"] = max((v["ratio"] for v in by_b.values()), default=math.nan)
    if sanity:
        agg["sanity_passed"] = all(s["equal"] for s in sanity)

    def recount(rec):
        c = cells[rec.sample_index]
        return count_joint(X, X, LinearForm(a1, 0, c["k1"]), LinearForm(a2, c["b"], c["k2"]),
                           primes, strict=False)

    agg["audit"] = _audit(spec, opts, records, recount)
    tables = {"cells": cells}
    if sanity:
        tables["sanity_b0"] = sanity
    return _finish(spec, records, agg, tables)


def run_sieve_deficiency(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """``#{n in (X, 2X]: omega(n) = k, no prime factor in ]P, Q]}`` for each window.

    Each count is normalised by ``delta_k(X) X (log P / log Q)^kappa`` with
    ``kappa = (k - 1) / log log X``.
    """
    opts = opts or RunOptions()
    X, k = spec.X, spec.single_k
    primes = _primes(opts, 2 * X)
    t = sieve_interval(X, X, primes, threads=opts.threads)
    rows_of = t.factor_rows()
    is_k = t.omega == k
    kappa = (k - 1) / math.log(math.log(X))
    d = delta_k(X, k)
    windows = sorted(spec.windows, key=lambda w: (math.log(w[1]), w[0]))
    records, rows = [], []
    for i, (P, Q) in enumerate(windows):
        hit = np.zeros(t.y, dtype=bool)
        inside = (t.factor_primes > P) & (t.factor_primes <= Q)
        hit[rows_of[inside]] = True
        cnt = int(np.count_nonzero(is_k & ~hit))
        norm = d * X * (math.log(P) / math.log(Q)) ** kappa
        records.append(SampleRecord(i, X, cnt, norm, cnt / norm))
        rows.append({"P": P, "Q": Q, "observed": cnt, "normalizer": norm, "ratio": cnt / norm})
    agg = summarize([r.ratio for r in records], spec.band_lo, spec.band_hi)
    ratios = [r["ratio"] for r in rows]
    agg["kappa"] = kappa
    agg["delta_k"] = d
    agg["decreasing_in_logQ"] = all(a > b for a, b in zip(ratios, ratios[1:])) if len(ratios) > 1 else None
    agg["audit"] = _audit(spec, opts, records,
                          lambda rec: audit.recount_deficient(X, X, k, *windows[rec.sample_index], primes))
    return _finish(spec, records, agg, {"windows": rows})


def _structured_config(spec: ExperimentSpec):
    mode = spec.s_mode or ("manual" if spec.layers or spec.infinity else "smallk")
    if mode == "none":
        return trivial_config(spec.X)
    if mode == "manual":
        return build_config_manual(spec.layers, spec.X, spec.infinity)
    if spec.eps is None:
        raise DomainError("the small-k preset needs eps")
    return build_config_smallk(spec.X, spec.eps).require_feasible()


def run_smallk_density(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """Counts of ``E_k`` intersected with ``S`` in windows of length ``y0``.

    The ratio is taken against ``delta_k(X) y0 / F_k(X)``.  With
    ``s_mode = "none"`` the set ``S`` is every integer and the counts are
    those of pik_short.
    """
    opts = opts or RunOptions()
    X, k = spec.X, spec.single_k
    config = _structured_config(spec)
    primes = _primes(opts, 2 * X)
    d = delta_k(X, k)
    F = F_k(X, k)

    def count(x, L):
        t = sieve_interval(x, L, primes)
        return int(np.count_nonzero((t.omega == k) & member_mask(t, config)))

    records, agg, trend = _sampled(
        spec, opts, count=count,
        predicted=lambda L: d * L / F,
        recount=lambda x, L: audit.recount_structured(x, L, k, config, primes),
    )
    agg.update({"delta_k": d, "F_k": F})
    tables = {"config": config.to_text().splitlines()}
    if trend:
        tables["trend"] = trend
    return _finish(spec, records, agg, tables)


def run_facto_check(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """Factorisation of the ``A ∩ S`` polynomial along layer ``j``.

    Each record holds one height ``t``: ``observed`` is the evaluated
    residual and ``predicted`` the tolerance.
    """
    opts = opts or RunOptions()
    X = spec.X
    config = build_config_manual(spec.layers, X, spec.infinity)
    pred = parse_integer_set(spec.set)
    j = INF_INDEX if spec.j == "inf" else spec.j
    pieces = build_factorization(X, config, pred, j)
    rng, _ = rng_streams(spec.seed)
    ts = rng.uniform(-spec.T, spec.T, size=spec.samples)
    res = evaluated_identity_residual(pieces, ts)
    records = [SampleRecord(i, float(t), float(r), FACTO_TOLERANCE, float(r) / FACTO_TOLERANCE)
               for i, (t, r) in enumerate(zip(ts, res))]
    agg = summarize([r.ratio for r in records], spec.band_lo, spec.band_hi)
    stats = {key: (v.item() if isinstance(v, np.generic) else v) for key, v in pieces.stats.items()}
    agg.update(stats)
    agg["max_residual"] = float(np.max(res))
    agg["identity_holds"] = (stats.get("route_mismatches", 0) == 0
                             and stats.get("identity_mismatches", 0) == 0
                             and float(np.max(res)) < FACTO_TOLERANCE)
    return _finish(spec, records, agg, {"config": config.to_text().splitlines()})


def indicator_vector(spec: ExperimentSpec, opts: RunOptions) -> CoeffVector:
    """Indicator of ``spec.set`` on ``(X, 2X]``; ``random:p`` draws from the sample stream."""
    X = spec.X
    text = spec.set.strip().lower()
    if text.startswith("random:"):
        p = float(text.split(":", 1)[1])
        if not 0 <= p <= 1:
            raise DomainError("random density must lie in [0, 1]")
        rng, _ = rng_streams(spec.seed)
        mask = rng.random(X) < p
    else:
        t = sieve_interval(X, X, _primes(opts, 2 * X), threads=opts.threads)
        mask = parse_integer_set(text).mask(t)
    return CoeffVector.from_dense(X, mask.astype(np.float64), 1.0)


def run_mvt_diag(spec: ExperimentSpec, opts: RunOptions | None = None) -> ExperimentReport:
    """Mean-value integral of an indicator polynomial against both brackets."""
    opts = opts or RunOptions()
    v = indicator_vector(spec, opts)
    rep = mvt_report(v, spec.T, spec.quad_step)
    rec = SampleRecord(0, spec.X, rep.integral, rep.mvt_bound, rep.ratio_mvt)
    agg = summarize([rec.ratio], spec.band_lo, spec.band_hi)
    agg.update(rep.as_dict())
    agg["density"] = len(v) / spec.X
    agg["quadrature_intervals"] = rep.intervals
    agg["imvt_below_mvt"] = rep.imvt_bound < rep.mvt_bound
    return _finish(spec, [rec], agg)


RUNNERS = {
    "pik_short": run_pik_short,
    "pik_smallk": run_pik_smallk,
    "friable_short": run_friable_short,
    "friable_all": run_friable_all,
    "correlation": run_correlation,
    "sieve_deficiency": run_sieve_deficiency,
    "smallk_density": run_smallk_density,
    "facto_check": run_facto_check,
    "mvt_diag": run_mvt_diag,
}


def run_experiment(spec: ExperimentSpec, opts: RunOptions | None = None, *,
                   timing: bool = False) -> ExperimentReport:
    """Dispatch on ``spec.kind``; ``runtime_ms`` is filled only when ``timing`` is set."""
    t0 = time.perf_counter()
    report = RUNNERS[spec.kind](spec, opts)
    if timing:
        report.runtime_ms = (time.perf_counter() - t0) * 1000.0
    return report
