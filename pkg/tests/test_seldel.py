import math
import warnings

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from omegalab.errors import CutoffError, DomainError
from omegalab.seldel import (
    EnumerationBoundWarning,
    MultiplicativeWeight,
    S_direct,
    S_mainterm,
    WeightedOmega,
    binom_z,
    cauchy_coefficient,
    cauchy_pik,
    constant_one,
    contour_radius,
    friable_indicator,
    g_z,
    g_z_tail,
    g_z_tail_profile,
    g_z_values,
    h0,
    id_over_phi,
    tau_z,
    write_contour_csv,
)
from omegalab.sieve import count_pik, sieve_interval

Z_GRID = [0.5, -0.7, 1.3 + 0.2j, 0.25j, -1.1 - 0.4j, 2.0, 0.9 + 0.9j, -0.3 + 1.7j]


def divisors(n: int) -> list:
    return sympy.divisors(n)


def test_tau_examples() -> None:
    assert tau_z(1, 0.37 + 2j) == 1
    for p in (2, 97, 7919):
        assert tau_z(p, 0.3 - 0.1j) == 0.3 - 0.1j
    assert tau_z(12, 2) == len(divisors(12)) == 6


@given(st.integers(1, 5000))
def test_tau_two_is_divisor_count(n: int) -> None:
    assert tau_z(n, 2).real == int(sympy.divisor_count(n))


def test_binomial_against_mpmath() -> None:
    for z in Z_GRID:
        for nu in range(6):
            ref = complex(mpmath.binomial(mpmath.mpmathify(z) + nu - 1, nu))
            assert abs(binom_z(z, nu) - ref) < 1e-13 * max(1.0, abs(ref))


def test_g_examples() -> None:
    one = constant_one()
    assert g_z(1, 0.4 + 0.1j, one) == 1
    for p in (2, 3, 101):
        assert abs(g_z(p, 0.4 + 0.1j, one)) < 1e-15
    with pytest.raises(DomainError):
        g_z(0, 1, one)


@pytest.mark.parametrize("f", [constant_one(), friable_indicator(7), id_over_phi(1.0, y=20)],
                         ids=["one", "friable", "id_over_phi"])
def test_convolution_roundtrip(f) -> None:
    for z in Z_GRID:
        for n in range(1, 1001):
            conv = sum(tau_z(d, z) * g_z(n // d, z, f) for d in divisors(n))
            omega = len(sympy.factorint(n))
            target = f.at(n) * z**omega
            assert abs(conv - target) < 1e-9, (n, z)


def test_g_values_table_matches_pointwise() -> None:
    f = id_over_phi(0.5, y=50)
    t = sieve_interval(0, 2000)
    vals = g_z_values(t, 0.7 - 0.2j, f)
    for n in (1, 2, 8, 12, 97, 360, 1024, 1999, 2000):
        assert vals[n - 1] == pytest.approx(g_z(n, 0.7 - 0.2j, f), rel=1e-13)


# --------------------------------------------------------------------------
# generating sums


def test_S_direct_examples() -> None:
    assert S_direct(1000, 500, 1) == 500
    assert S_direct(1, 100, 0) == 0
    assert S_direct(0, 100, 0) == 1
    brute = sum(2 ** len(sympy.factorint(n)) for n in range(1, 101))
    assert S_direct(0, 100, 2) == brute


@given(st.integers(0, 10**6), st.integers(1, 500), st.floats(-2, 2), st.floats(-2, 2))
def test_S_direct_conjugate_symmetry(x: int, xp: int, re: float, im: float) -> None:
    f = id_over_phi(1.0, y=100)
    z = complex(re, im)
    a = S_direct(x, xp, z, f)
    b = S_direct(x, xp, z.conjugate(), f)
    assert abs(a - b.conjugate()) <= 1e-12 * max(1.0, abs(a))


def test_S_direct_is_polynomial_of_bounded_degree() -> None:
    data = WeightedOmega.build(10**6, 2000, friable_indicator(1000))
    deg = data.max_omega
    zs = [complex(0.5 + 0.1 * i, 0.2 * i) for i in range(deg + 1)]
    coeffs = np.linalg.solve(np.vander(np.array(zs), increasing=True), np.array([data.S(z) for z in zs]))
    for z in (1.7 - 0.3j, -0.9 + 0.4j, 2.0):
        interp = np.polyval(coeffs[::-1], z)
        assert abs(interp - data.S(z)) < 1e-7 * max(1.0, abs(data.S(z)))


def test_h0_identities() -> None:
    h, bound = h0(1, constant_one())
    assert abs(h - 1) < 1e-12
    # s_p for f = 1 everywhere is exactly 1
    assert np.allclose(constant_one().s_p(np.array([2, 3, 5, 7919])), 1.0, rtol=0, atol=1e-15)
    with pytest.raises(CutoffError):
        h0(0.5, friable_indicator(10))
    with pytest.raises(CutoffError):
        h0(0.5, id_over_phi(1.0, y=10**5), cutoff=1000)


def test_s_p_against_series() -> None:
    f = id_over_phi(1.0, y=30)
    primes = np.array([2, 3, 29, 31])
    s = f.s_p(primes)
    for p, sp in zip(primes.tolist(), s.tolist()):
        if p > 30:
            assert sp == 1.0
        else:
            # f(p^nu) = p/(p-1) for every nu, so s_p = (p-1) (p/(p-1)) / (p-1) = p/(p-1)
            assert sp == pytest.approx(p / (p - 1), rel=1e-14)


def test_S_mainterm_examples() -> None:
    assert S_mainterm(10**7, 10**6, 1) == pytest.approx(10**6, rel=1e-12)
    kappa = 0.4
    v = S_mainterm(10**7, 10**6, kappa)
    assert abs(v.imag) < 1e-9 * abs(v.real) and v.real > 0
    with pytest.raises(DomainError):
        S_mainterm(2, 10, 0.5)


def test_S_ratio_band() -> None:
    data = WeightedOmega.build(10**7, 10**6, constant_one())
    for z in np.linspace(0.3, 1.5, 7):
        ratio = data.S(z).real / S_mainterm(10**7, 10**6, z).real
        assert 0.5 <= ratio <= 2.0, (z, ratio)


# --------------------------------------------------------------------------
# contour recovery


def test_cauchy_examples() -> None:
    x, xp = 10**5, 10**4
    assert round(cauchy_pik(x, xp, 3, nodes=64)) == count_pik(x, xp, 3)
    assert abs(cauchy_pik(x, xp, 3, nodes=64) - count_pik(x, xp, 3)) < 1e-6
    data = WeightedOmega.build(x, xp, constant_one())
    assert abs(cauchy_pik(x, xp, data.max_omega + 1, data=data)) < 1e-6
    assert abs(cauchy_pik(x, xp, 1, data=data) - count_pik(x, xp, 1)) < 1e-6


def test_cauchy_exact_beyond_degree_weighted() -> None:
    x, xp = 2 * 10**6, 5000
    f = id_over_phi(1.0, y=100)
    data = WeightedOmega.build(x, xp, f)
    for k in range(1, data.max_omega + 1):
        exact = math.fsum(data.weights[data.omega == k].tolist())
        est = cauchy_pik(x, xp, k, f, nodes=max(8, data.max_omega + 1), data=data)
        assert abs(est - exact) <= 1e-9 * max(1.0, exact)
        doubled = cauchy_pik(x, xp, k, f, nodes=2 * max(8, data.max_omega + 1), data=data)
        assert abs(doubled - est) <= 1e-9 * max(1.0, abs(est))


def test_contour_radius_choice() -> None:
    assert contour_radius(10**8, 1) == 0.5
    assert contour_radius(10**8, 4) == pytest.approx(3 / math.log(math.log(1e8)))
    with pytest.raises(DomainError):
        contour_radius(10**8, 0)


def test_cauchy_any_radius_same_integral() -> None:
    data = WeightedOmega.build(10**4, 3000, constant_one())
    ref = cauchy_pik(10**4, 3000, 2, data=data)
    for r in (0.3, 1.0, 2.5):
        assert cauchy_pik(10**4, 3000, 2, data=data, radius=r) == pytest.approx(ref, rel=1e-9)


def test_cauchy_errors() -> None:
    with pytest.raises(DomainError):
        cauchy_coefficient(lambda z: z, 1, 1.0, 4)
    with pytest.raises(DomainError):
        cauchy_coefficient(lambda z: z, 1, 0.0, 16)


def test_contour_csv(tmp_path) -> None:
    path = tmp_path / "c.csv"
    write_contour_csv(path, [(3, 64, 1.5, 1)])
    lines = path.read_text().splitlines()
    assert lines[0] == "k,nodes,estimate,exact,abs_err"
    assert lines[1] == "3,64,1.5,1,0.5"


# --------------------------------------------------------------------------
# weights and tails


def test_weight_bounds() -> None:
    f = id_over_phi(1.0)
    p = np.array([2, 3, 5, 7, 11, 101])
    for nu in (1, 2, 5):
        assert not f.bound_violations(p, np.full(len(p), nu)).any()
    bad = MultiplicativeWeight(lambda p, nu: 3.0 * np.ones(np.shape(p)), 1.0, 1.0)
    assert bad.bound_violations(np.array([2]), np.array([1])).all()
    with pytest.raises(DomainError):
        MultiplicativeWeight(lambda p, nu: p, 1.0, 2.0)


def test_g_tail_examples() -> None:
    with pytest.warns(EnumerationBoundWarning):
        assert g_z_tail(5000, 0.5, constant_one(), D=1000).value == 0.0
    with pytest.warns(EnumerationBoundWarning):
        assert g_z_tail(1, 1, constant_one(), D=10**4).value == 0.0
    with pytest.warns(EnumerationBoundWarning):
        g_z_tail(1, 1, constant_one(), D=10**7)
    with pytest.raises(DomainError), warnings.catch_warnings():
        warnings.simplefilter("ignore")
        g_z_tail(0.5, 1, constant_one())


def test_g_tail_friable_decays() -> None:
    f = friable_indicator(20)
    ts = [10, 100, 1000, 10**4]
    tails = g_z_tail_profile(ts, 1, f, D=10**5)
    assert all(a > b > 0 for a, b in zip(tails, tails[1:]))
    with pytest.warns(EnumerationBoundWarning):
        single = g_z_tail(100, 1, f, D=10**5)
    assert single.value == pytest.approx(tails[1], rel=1e-12)
