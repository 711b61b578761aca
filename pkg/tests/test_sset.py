import math

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from omegalab.errors import DomainError, InfeasibleConfigError
from omegalab.sieve import AllIntegers, EmptySet, FactorEntry, OmegaEquals, sieve_interval
from omegalab.sset import (
    INF_INDEX,
    Layer,
    build_config_manual,
    build_config_paper,
    build_config_smallk,
    complement_rhs,
    config_from_text,
    is_member_layer,
    is_member_S,
    layer_mask,
    load_config,
    measure_complement,
    member_mask,
    paper_layer_logs,
    subwindow_index,
    trivial_config,
)

mpmath.mp.dps = 40


def oracle_in_layer(n: int, P: float, Q: float, H: float) -> bool:
    """Layer membership from sympy's factorization and high-precision logarithms."""
    f = sympy.factorint(n)
    inside = [p for p in f if P < p <= Q]
    if not inside or any(f[p] >= 2 for p in inside):
        return False
    lo = int(mpmath.floor(H * mpmath.log(P)))
    hi = H * mpmath.log(Q)
    seen = set()
    for p in inside:
        v = int(mpmath.ceil(H * mpmath.log(p))) - 1
        if lo <= v <= hi:
            if v in seen:
                return False
            seen.add(v)
    return True


def entry_of(n: int) -> FactorEntry:
    return sieve_interval(n - 1, 1).entry(n)


# --------------------------------------------------------------------------
# builders


def test_manual_examples() -> None:
    c = build_config_manual([(10, 100, 4)], 10**5)
    assert c.mode == "manual" and c.J == 1 and c.feasible
    assert c.layer(1).I == (9, 18)
    with pytest.raises(InfeasibleConfigError):
        build_config_manual([(10, 100, 4), (50, 200, 4)], 10**5)
    with pytest.raises(InfeasibleConfigError):
        build_config_manual([], 10**5)
    with pytest.raises(InfeasibleConfigError):
        build_config_manual([(1, 100, 4)], 10**5)
    with pytest.raises(InfeasibleConfigError):
        build_config_manual([(10, 100, 1.5)], 10**5)
    with pytest.raises(InfeasibleConfigError):
        build_config_manual([(10, 100, 4)], 10**5, infinity=(50, 500, 4))


def test_layer_lookup() -> None:
    c = build_config_manual([(10, 100, 4)], 10**5, infinity=(200, 1000, 3))
    assert c.layer(INF_INDEX).is_infinity and c.layer(math.inf).P == 200
    with pytest.raises(IndexError):
        c.layer(2)
    with pytest.raises(IndexError):
        build_config_manual([(10, 100, 4)], 10**5).layer(INF_INDEX)


def test_smallk_layers_from_formulas() -> None:
    X, eps = 10**12, 0.01
    c = build_config_smallk(X, eps)
    lX = math.log(X)
    l2X = math.log(lX)
    l3X = math.log(l2X)
    P1 = l3X ** (2 + 100 * eps)
    expected = [
        (P1, P1 ** (1 + eps)),
        (l2X ** (1 / eps), l2X ** ((1 + eps) / eps)),
        (lX ** (1 / eps), math.exp(l2X**2)),
    ]
    assert c.mode == "small_k" and c.J == 3
    for L, (P, Q) in zip(c.layers, expected):
        assert L.P == pytest.approx(P, rel=1e-12)
        assert L.Q == pytest.approx(Q, rel=1e-12)
        assert L.H == pytest.approx(math.log(math.log(Q)) ** 2, rel=1e-12)
    assert c.layers[0].Q == pytest.approx(c.layers[0].P ** (1 + eps), rel=1e-12)
    assert c.infinity.P == pytest.approx(math.exp(lX ** (2 / 3 + eps)), rel=1e-12)
    # at this size the windows overlap and the preset must say so
    assert not c.feasible
    with pytest.raises(InfeasibleConfigError):
        c.require_feasible()


def test_smallk_domain() -> None:
    with pytest.raises(DomainError):
        build_config_smallk(10**6, 0.01)
    with pytest.raises(DomainError):
        build_config_smallk(10**40, 0.5)


PAPER_ARGS = dict(X=10**5000, h=10**60, r=1.0, eps=0.01, delta=0.5, theta=1.5, K=100.0,
                  P1=math.exp(80.0), Pinf=10**435, Qinf=10**2000)


def test_paper_feasible_example() -> None:
    c = build_config_paper(**PAPER_ARGS)
    assert c.feasible, c.violations
    lX = math.log(PAPER_ARGS["X"])
    assert c.infinity.H == pytest.approx(math.log(lX) ** 2, rel=1e-14)
    # delta theta h exceeds e^K, so Q_1 = e^K
    assert c.layers[0].Q == pytest.approx(math.exp(100.0), rel=1e-12)
    # J is the largest j with Q_j <= e^K
    l3 = math.log(math.log(100.0))
    J = 0
    while (J + 1) ** (4 * (J + 1) + 2) * l3 ** (2 * J) * 100.0 <= 100.0:
        J += 1
    assert c.J == J == 1


def test_paper_small_q1_branch() -> None:
    args = dict(PAPER_ARGS, h=10**30)
    c = build_config_paper(**args)
    assert c.layers[0].Q == pytest.approx(0.5 * 1.5 * 1e30, rel=1e-12)


def test_paper_recursion_reproduces_layers() -> None:
    args = dict(PAPER_ARGS, K=50000.0, X=10**200, h=10**8, P1=10**6)
    c = build_config_paper(**args)
    assert c.J >= 2
    logQ1 = math.log(c.layers[0].Q)
    l3 = math.log(math.log(logQ1))
    for L in c.layers:
        lp, lq = paper_layer_logs(L.index, 1.0, l3, math.log(args["P1"]), logQ1)
        assert L.P == (math.exp(lp) if lp < 709 else math.inf)
        assert L.Q == (math.exp(lq) if lq < 709 else math.inf)
        assert L.H == L.index**2 * c.layers[0].H
    assert not c.feasible


def test_paper_reports_every_violation_at_desk_scale() -> None:
    c = build_config_paper(X=10**9, h=10**4, r=1.0, eps=0.01, delta=1.0, theta=1.0, K=10.0,
                           P1=50.0, Pinf=1e3, Qinf=1e4)
    text = " | ".join(c.violations)
    assert "(log2 X)^2 <= K" in text
    assert not c.feasible
    c = build_config_paper(**dict(PAPER_ARGS, r=2.0, delta=2.0))
    assert any("r=" in v for v in c.violations)
    assert any("delta" in v for v in c.violations)


def test_paper_log3_undefined_is_infeasible() -> None:
    c = build_config_paper(**dict(PAPER_ARGS, h=10))
    assert any("log3" in v for v in c.violations)


# --------------------------------------------------------------------------
# membership


def test_membership_examples() -> None:
    c = build_config_manual([(10, 100, 4)], 10**5)
    assert not is_member_layer(entry_of(2**5 * 3), 1, c)
    assert not is_member_layer(entry_of(11**2 * 3), 1, c)
    # 83 and 89 lie in one subwindow for H = 4, 97 in the next
    assert subwindow_index(83, 4) == subwindow_index(89, 4) != subwindow_index(97, 4)
    assert not is_member_layer(entry_of(83 * 89), 1, c)
    assert is_member_layer(entry_of(89 * 97), 1, c)
    assert is_member_layer(entry_of(11 * 97), 1, c)
    assert is_member_S(entry_of(11 * 97), c)


def test_membership_is_conjunction() -> None:
    c = build_config_manual([(3, 10, 4), (11, 100, 4)], 10**5)
    assert is_member_layer(entry_of(5 * 7), 1, c) and not is_member_layer(entry_of(5 * 7), 2, c)
    assert not is_member_S(entry_of(5 * 7), c)
    t = sieve_interval(1000, 3000)
    mS = member_mask(t, c)
    for L in c.all_layers:
        assert np.all(layer_mask(t, L)[mS])


def test_infinity_only_config() -> None:
    c = build_config_manual([], 10**5, infinity=(10, 100, 4))
    t = sieve_interval(500, 500)
    assert np.array_equal(member_mask(t, c), layer_mask(t, c.infinity))
    assert member_mask(t, trivial_config(10**5)).all()


@given(st.integers(2, 10**6), st.sampled_from([(10, 100, 4), (3, 50, 2.5), (100, 2000, 7.3), (2, 1000, 2)]))
def test_membership_matches_oracle(n: int, lay) -> None:
    c = build_config_manual([lay], 10**6)
    assert is_member_layer(entry_of(n), 1, c) == oracle_in_layer(n, *lay)


@given(st.integers(0, 10**6), st.integers(1, 2000))
def test_vectorised_matches_per_entry(x: int, y: int) -> None:
    c = build_config_manual([(5, 60, 3), (80, 900, 6)], 10**6, infinity=(1000, 5000, 9))
    t = sieve_interval(x, y)
    mask = member_mask(t, c)
    assert mask.tolist() == [is_member_S(e, c) for e in t.entries()]


@given(st.permutations([(11, 1), (13, 1), (97, 1), (2, 3)]))
def test_membership_ignores_factor_order(factors) -> None:
    c = build_config_manual([(10, 100, 4)], 10**6)
    n = 8 * 11 * 13 * 97
    base = is_member_S(entry_of(n), c)
    permuted = FactorEntry(n, tuple(factors))
    assert is_member_S(permuted, c) == base


def test_subwindows_are_half_open() -> None:
    # p = e^{v/H} exactly would sit at the top of window v-1; use an integer boundary
    H = 1 / math.log(2)
    assert subwindow_index(2, H).item() == 0
    assert subwindow_index(4, H).item() == 1
    assert subwindow_index(3, H).item() == 1


# --------------------------------------------------------------------------
# complement counts


def test_complement_all_integers_example() -> None:
    X = 10**5
    lay = (10, 100, 4)
    c = build_config_manual([lay], X)
    count_a, count_as, rhs = measure_complement(X, c, AllIntegers())
    brute = sum(1 for n in range(X, 2 * X + 1) if not oracle_in_layer(n, *lay))
    assert count_a == X + 1
    assert count_as == brute == 56032
    term = math.log(10) / math.log(100) + 1 / 10 + math.log(1 + math.log(100) / math.log(10)) / 4
    assert rhs == pytest.approx(X * term, rel=1e-14) == complement_rhs(X, c)


def test_complement_empty_set() -> None:
    c = build_config_manual([(10, 100, 4)], 10**4)
    m = measure_complement(10**4, c, EmptySet())
    assert (m.count_A, m.count_A_minus_S) == (0, 0) and m.bound_rhs > 0


def test_complement_monotone_in_A() -> None:
    X = 50_000
    c = build_config_manual([(10, 100, 4)], X)
    whole = measure_complement(X, c, AllIntegers())
    for k in (1, 2, 3):
        part = measure_complement(X, c, OmegaEquals(k))
        assert part.count_A_minus_S <= whole.count_A_minus_S


def test_complement_fraction_drops_as_window_widens() -> None:
    X = 10**5
    fractions = []
    for Q in (50, 5000):
        c = build_config_manual([(10, Q, 4)], X)
        m = measure_complement(X, c, OmegaEquals(3))
        fractions.append(m.count_A_minus_S / m.count_A)
    assert fractions[1] < fractions[0]


def test_complement_blocks_and_threads_agree() -> None:
    X = 30_000
    c = build_config_manual([(10, 100, 4)], X, infinity=(200, 3000, 5))
    a = measure_complement(X, c, AllIntegers())
    b = measure_complement(X, c, AllIntegers(), block=777, threads=3)
    assert tuple(a) == tuple(b)
    with pytest.raises(DomainError):
        measure_complement(0, c, AllIntegers())


# --------------------------------------------------------------------------
# serialisation


@given(st.floats(2, 1e6, allow_nan=False), st.floats(1.0001, 50), st.floats(2, 100))
def test_config_text_roundtrip(P: float, spread: float, H: float) -> None:
    c = build_config_manual([(P, P * spread, H)], 123456.789, infinity=(P * spread * 2, P * spread * 7, H + 1))
    back = config_from_text(c.to_text())
    assert back == c


def test_config_file_roundtrip_paper(tmp_path) -> None:
    c = build_config_paper(X=10**9, h=10**4, r=0.5, eps=0.01, delta=1.0, theta=1.0, K=10.0,
                           P1=50.0, Pinf=1e3, Qinf=1e4)
    path = tmp_path / "s.cfg"
    c.save(path)
    back = load_config(path)
    assert back.layers == c.layers and back.infinity == c.infinity
    assert back.violations == c.violations and back.r == c.r and back.J == c.J


def test_config_text_errors() -> None:
    with pytest.raises(ValueError):
        config_from_text("mode = manual\nX = 10\nbogus = 1\n")
    with pytest.raises(ValueError):
        config_from_text("layer 1 10 100 4\n")


def test_layer_complement_term() -> None:
    L = Layer(1, 10.0, 100.0, 4.0)
    assert L.complement_term(0.5) == pytest.approx(0.5**0.5 + 0.1 + math.log(3) / 4)
