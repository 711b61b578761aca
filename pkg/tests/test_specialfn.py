import math

import mpmath
import numpy as np
import pytest
import sympy
from hypothesis import given
from hypothesis import strategies as st

from omegalab.errors import CutoffError, DomainError, PoleError, ToleranceError
from omegalab.sieve import PrimeFilter, generate_primes
from omegalab.specialfn import (
    DensityParams,
    E_x,
    F_k,
    bigQ,
    delta_k,
    dickman_asymptotic_check,
    dickman_build,
    dickman_r,
    euler_product,
    gamma,
    identity_residuals,
    lambda_fn,
    lambda_real,
    mertens_sums,
    restricted_prime_sum,
    rgamma,
)
from omegalab.specialfn.dickman import DickmanTable, segment_integrals

mpmath.mp.dps = 30


@pytest.fixture(scope="module")
def rho_table() -> DickmanTable:
    return dickman_build(umax=30)


# --------------------------------------------------------------------------
# Gamma


def test_gamma_examples() -> None:
    assert gamma(1) == 1.0
    assert gamma(5) == pytest.approx(24.0, rel=1e-15)
    assert gamma(0.5) == pytest.approx(math.sqrt(math.pi), rel=1e-15)


@pytest.mark.parametrize("z", [0, -1, -7, 0.0, complex(-3, 0)])
def test_gamma_poles(z) -> None:
    with pytest.raises(PoleError):
        gamma(z)
    assert rgamma(z) == 0


@given(st.floats(-8, 8), st.floats(-8, 8))
def test_gamma_matches_mpmath(re: float, im: float) -> None:
    z = complex(re, im)
    if im == 0 and re <= 0 and float(re).is_integer():
        return
    ref = complex(mpmath.gamma(mpmath.mpc(re, im)))
    assert abs(gamma(z) - ref) <= 1e-12 * abs(ref) + 1e-300


@given(st.floats(0.1, 6), st.floats(-4, 4))
def test_gamma_recurrence(re: float, im: float) -> None:
    z = complex(re, im)
    assert gamma(z + 1) == pytest.approx(z * gamma(z), rel=1e-12)


# --------------------------------------------------------------------------
# lambda


def test_lambda_at_zero_and_one() -> None:
    assert abs(lambda_fn(0).value - 1) < 1e-12
    assert abs(lambda_fn(1).value - 1) < 1e-12


def test_lambda_matches_extended_precision_product() -> None:
    cutoff = 10_000
    primes = generate_primes(cutoff).primes.tolist()
    for z in (0.5, 0.3 + 0.4j, 2.5, -0.5):
        zz = mpmath.mpmathify(z)
        prod = mpmath.fprod((1 + zz / (p - 1)) * (1 - mpmath.mpf(1) / p) ** zz for p in primes)
        ref = complex(prod * mpmath.rgamma(zz + 1))
        assert abs(lambda_fn(z, cutoff).value - ref) < 1e-12 * max(1.0, abs(ref))


@pytest.mark.parametrize("z", [0.5, 1.5, 0.2 + 0.7j, 3.0])
def test_lambda_cutoff_doubling_within_bound(z) -> None:
    a = lambda_fn(z, 10**5)
    b = lambda_fn(z, 2 * 10**5)
    assert abs(a.value - b.value) <= a.tail_bound
    assert b.tail_bound < a.tail_bound


def test_lambda_errors() -> None:
    with pytest.raises(DomainError):
        lambda_fn(20)
    with pytest.raises(DomainError):
        lambda_fn(0.5, 50)
    with pytest.raises(CutoffError):
        lambda_fn(0.5, 10**4, tol=1e-15)


@given(st.floats(-3, 3), st.floats(-3, 3))
def test_lambda_conjugate_symmetry(re: float, im: float) -> None:
    a = lambda_fn(complex(re, im), 1000).value
    b = lambda_fn(complex(re, -im), 1000).value
    assert abs(a - b.conjugate()) <= 1e-12 * max(1.0, abs(a))


def test_euler_product_with_weights() -> None:
    val, bound = euler_product(1.0, 1000, s=np.zeros(168))
    ref = math.prod((1 - 1 / p) for p in generate_primes(1000).primes.tolist())
    assert val.real == pytest.approx(ref, rel=1e-12)
    assert bound > 0


# --------------------------------------------------------------------------
# densities


def test_bigQ_examples() -> None:
    assert bigQ(1) == 0
    assert bigQ(0) == 1
    assert bigQ(math.e) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(DomainError):
        bigQ(-0.1)


def test_delta_k_at_e_to_the_e() -> None:
    assert delta_k(math.exp(math.e), 1) == pytest.approx(1 / math.e, rel=1e-12)


def test_delta_k_uses_lambda_consistently() -> None:
    x, k = 1e8, 3
    p = DensityParams.of(x, k)
    for cutoff in (10**5, 10**6):
        lam = lambda_real(p.kappa, cutoff)
        direct = lam * p.loglog ** (k - 1) / (math.log(x) * math.factorial(k - 1))
        assert delta_k(x, k, cutoff) == pytest.approx(direct, rel=1e-13)
    assert delta_k(x, k, 10**5) == pytest.approx(delta_k(x, k, 10**6), rel=1e-6)


@given(st.floats(1e4, 1e300), st.integers(2, 40))
def test_delta_k_stirling_band(x: float, k: int) -> None:
    # delta_k (log x)^Q(kappa) sqrt(log2 x) = lambda(kappa) e^{-r_m} / sqrt(2 pi kappa), m = k - 1,
    # with 1/(12m + 1) < r_m < 1/(12m)
    p = DensityParams.of(x, k)
    if p.kappa > 10:
        return
    m = k - 1
    lhs = delta_k(x, k) * math.exp(bigQ(p.kappa) * math.log(math.log(x))) * math.sqrt(p.loglog)
    scaled = lhs * math.sqrt(2 * math.pi * p.kappa) / lambda_real(p.kappa)
    assert math.exp(-1 / (12 * m)) * (1 - 1e-9) <= scaled <= math.exp(-1 / (12 * m + 1)) * (1 + 1e-9)


def test_F_k_extended_precision() -> None:
    x, k = 10**100, 5
    l2 = mpmath.log(mpmath.log(mpmath.mpf(x)))
    l3 = mpmath.log(l2)
    ref = l2**2 / k**2 / (1 - mpmath.exp(-k * l3 / l2))
    assert F_k(x, k) == pytest.approx(float(ref), rel=1e-13)


def test_F_k_limits() -> None:
    # large k: bracket -> 1
    x = 1e12
    l2 = math.log(math.log(x))
    assert F_k(x, 400) == pytest.approx((l2 / 400) ** 2, rel=1e-12)
    # fixed k, growing x: ratio to (log2 x)^3 / (k^3 log3 x) tends to 1
    k = 5
    gaps = []
    for e in (10, 100, 1000, 10000):
        x = 10**e
        l2 = math.log(math.log(x))
        l3 = math.log(l2)
        gaps.append(abs(F_k(x, k) / (l2**3 / (k**3 * l3)) - 1))
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


def test_F_k_domain() -> None:
    with pytest.raises(DomainError):
        F_k(10, 3)
    with pytest.raises(DomainError):
        F_k(1e6, 0)


# --------------------------------------------------------------------------
# prime sums


def test_E_x_examples() -> None:
    assert E_x(1) == 1.0
    assert E_x(10) == pytest.approx(1 + 1 / 2 + 1 / 3 + 1 / 5 + 1 / 7, rel=1e-15)
    cut = PrimeFilter(((2, 5),))
    assert E_x(10, cut) == pytest.approx(E_x(10) - 1 / 3 - 1 / 5, rel=1e-15)


def test_restricted_prime_sum_examples() -> None:
    assert restricted_prime_sum(10, 1) == 4
    assert restricted_prime_sum(1000, 0) == E_x(1000) - 1
    for y in (10**3, 10**4, 10**5, 10**6):
        gap = restricted_prime_sum(y, 0.1) - (E_x(y) - 1)
        assert 0 < gap <= y**0.2


def test_mertens_examples() -> None:
    r, w = mertens_sums(3)
    assert r == pytest.approx(1 / 2 + 1 / 3) and w == pytest.approx(math.log(2) / 2 + math.log(3) / 3)
    r4, w4 = mertens_sums(4)
    assert r4 == pytest.approx(r + 1 / 4) and w4 == pytest.approx(w + math.log(4) / 4)


def test_mertens_sums_match_prime_power_oracle() -> None:
    x = 3000
    recip = logw = 0.0
    for n in range(2, x + 1):
        f = sympy.factorint(n)
        if len(f) == 1:
            recip += 1 / n
            logw += math.log(n) / n
    r, w = mertens_sums(x)
    assert r == pytest.approx(recip, rel=1e-12) and w == pytest.approx(logw, rel=1e-12)


def test_mertens_reciprocal_sum_settles() -> None:
    # the sum of 1/p^nu over prime powers minus log log x settles to a constant near 1.0346
    gaps = [mertens_sums(x)[0] - math.log(math.log(x)) for x in (10**4, 10**5, 10**6)]
    assert all(abs(g - 1.0346) < 2e-3 for g in gaps)
    assert abs(gaps[2] - gaps[1]) < abs(gaps[1] - gaps[0])


# --------------------------------------------------------------------------
# Dickman rho


def test_rho_examples(rho_table) -> None:
    assert rho_table.rho(0.5) == 1.0
    assert rho_table.rho(-1.0) == 0.0
    assert abs(rho_table.rho(2.0) - (1 - math.log(2))) < 1e-14


@given(st.floats(1.0, 2.0))
def test_rho_closed_form_first_unit(u: float) -> None:
    table = dickman_build(umax=3)
    assert abs(table.rho(u) - (1 - math.log(u))) < 1e-12


@given(st.floats(2.0, 3.0))
def test_rho_closed_form_second_unit(u: float) -> None:
    table = dickman_build(umax=3)
    uu = mpmath.mpf(u)
    ref = 1 - (1 - mpmath.log(uu - 1)) * mpmath.log(uu) + mpmath.polylog(2, 1 - uu) + mpmath.pi**2 / 12
    assert abs(table.rho(u) - float(ref)) < 1e-12


def test_rho_known_values(rho_table) -> None:
    assert rho_table.rho(3.0) == pytest.approx(0.04860838829, rel=1e-9)
    assert rho_table.rho(10.0) == pytest.approx(2.770171837726e-11, rel=1e-10)


def test_rho_integral_identity(rho_table) -> None:
    assert float(np.max(identity_residuals(rho_table))) < 1e-12
    assert rho_table.integrator_agreement < 1e-12
    assert float(np.sum(segment_integrals(rho_table)[: rho_table.per_unit])) == pytest.approx(1.0, rel=1e-14)


def test_rho_step_refinement_agrees() -> None:
    a, b = dickman_build(umax=12, step=1 / 64), dickman_build(umax=12, step=1 / 128)
    for u in (2.3, 5.5, 9.01, 12.0):
        assert a.rho(u) == pytest.approx(b.rho(u), rel=1e-12)


def test_rho_monotone_and_positive(rho_table) -> None:
    v = rho_table.values
    assert np.all(v > 0) and np.all(np.diff(v) <= 0)


def test_dickman_r(rho_table) -> None:
    assert dickman_r(rho_table, 1 + 1e-9) == pytest.approx(1.0, rel=1e-6)
    assert dickman_r(rho_table, 2.0) == pytest.approx(1 / (2 * (1 - math.log(2))), rel=1e-13)
    for u in np.linspace(1.5, 29.5, 15):
        assert u * rho_table.rho(u) * dickman_r(rho_table, u) == pytest.approx(rho_table.rho(u - 1), rel=1e-13)
        assert rho_table.derivative(u) == pytest.approx(-rho_table.rho(u - 1) / u)


def test_dickman_asymptotic_trend(rho_table) -> None:
    assert math.isfinite(dickman_asymptotic_check(rho_table, 2.0))
    ratios = [dickman_asymptotic_check(rho_table, u) for u in range(5, 31)]
    assert all(a > b for a, b in zip(ratios, ratios[1:]))
    assert abs(ratios[-1] - 1) < abs(ratios[0] - 1)
    with pytest.raises(DomainError):
        dickman_asymptotic_check(rho_table, 1.5)


def test_dickman_build_errors() -> None:
    with pytest.raises(DomainError):
        dickman_build(umax=5, step=1 / 32)
    with pytest.raises(DomainError):
        dickman_build(umax=5, step=0.0150)
    with pytest.raises(DomainError):
        dickman_build(umax=0.5)
    with pytest.raises(ToleranceError):
        dickman_build(umax=3, tol=1e-300)


def test_dickman_table_persistence(tmp_path, rho_table) -> None:
    path = tmp_path / "rho.bin"
    rho_table.save(path)
    back = DickmanTable.load(path)
    assert np.array_equal(back.values, rho_table.values)
    assert back.rho(7.3) == rho_table.rho(7.3)
    raw = bytearray(path.read_bytes())
    raw[100] ^= 1
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError):
        DickmanTable.load(path)
    csv_path = tmp_path / "rho.csv"
    rho_table.to_csv(csv_path)
    assert csv_path.read_text().splitlines()[0] == "u,value"
    with pytest.raises(DomainError):
        rho_table.rho(31.0)
