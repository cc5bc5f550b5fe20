import math
from fractions import Fraction

import pytest

from sievewalk._arith import mobius_up_to, primes_up_to
from sievewalk.densities import (
    constant_c,
    constant_c3_kfree,
    constant_c3_series,
    count_V,
    count_V2,
    count_V3,
    f_factor,
    mertens_cx,
)
from sievewalk.sieve import GeneratorFamily, SieveSystem

from conftest import squarefree_system

SIX_OVER_PI2 = 6 / math.pi**2


def carlitz(P):
    return math.prod(1 - 2 / p**2 for p in primes_up_to(P).tolist())


# -------------------------------------------------------------- constant c


def test_constant_c_squarefree():
    dv = constant_c(squarefree_system(), 10**6)
    assert abs(dv.value - 0.60793) <= 1e-4
    assert abs(dv.value - SIX_OVER_PI2) <= dv.tail_estimate
    assert dv.terms_used == 168


def test_constant_c_consecutive_squarefree():
    dv = constant_c(squarefree_system((0, 1)), 10**6)
    assert dv.value == pytest.approx(carlitz(1000), rel=1e-12)
    # the infinite product, truncated much further, stays inside the reported tail
    assert abs(dv.value - carlitz(10**6)) <= dv.tail_estimate


def test_constant_c_empty_product():
    dv = constant_c(squarefree_system(), 3)
    assert dv.value == 1.0 and dv.terms_used == 0


def test_constant_c_explicit_list_is_exact():
    s = SieveSystem(GeneratorFamily.explicit([6, 35]), (0, 2))
    full = constant_c(s, 100)
    assert full.value == pytest.approx((1 - 2 / 6) * (1 - 2 / 35))
    assert full.tail_estimate == 0
    part = constant_c(s, 10)
    assert abs(part.value - full.value) <= part.tail_estimate


@pytest.mark.parametrize("bound", [10**2, 10**4, 10**6])
def test_constant_c_tail_shrinks_and_covers(bound):
    dv = constant_c(squarefree_system(), bound)
    assert abs(dv.value - SIX_OVER_PI2) <= dv.tail_estimate


# ----------------------------------------------------------------- c_x


@pytest.mark.parametrize(
    "x, beta, expected",
    [
        (1.2, 0.3, 1.0),
        (math.e, 0.4, 0.5),
    ],
)
def test_mertens_examples(x, beta, expected):
    assert mertens_cx(x, beta).value == pytest.approx(expected)


def test_mertens_two_primes():
    # threshold in [3, 5): primes {2, 3}
    x = math.exp(math.e)
    assert mertens_cx(x, 0.4).value == pytest.approx(1 / 3)


def test_mertens_beta_range():
    with pytest.raises(ValueError):
        mertens_cx(100, 0.5)


# ------------------------------------------------------------------- c3


def test_c3_kfree_degenerate():
    dv = constant_c3_kfree(2, 2, (-1, 0, 1), (-1, 0, 1), 10**5)
    assert dv.value == 0.0


def test_c3_kfree_empty():
    assert constant_c3_kfree(2, 2, (0,), (0,), 1).value == 1.0


def test_c3_kfree_squarefree_closed_form():
    # factor 1 - ((p - 1)/(p^2 - 1))^2 = 1 - 1/(p + 1)^2
    dv = constant_c3_kfree(2, 2, (0,), (0,), 10**5)
    expected = math.prod(1 - 1 / (p + 1) ** 2 for p in primes_up_to(10**5).tolist())
    assert dv.value == pytest.approx(expected, rel=1e-12)
    assert dv.tail_estimate < 1e-5


def test_f_factor_r1():
    sq = squarefree_system()
    assert f_factor(1, sq, 10**6) == 1


def test_f_factor_prime():
    # f(p) = g/(g - 1) * (1 - 1/p) for squarefree, g = p^2
    sq = squarefree_system()
    for p in (2, 3, 5, 7):
        assert f_factor(p, sq, 10**6) == Fraction(p * p, p * p - 1) * (1 - Fraction(1, p))


def test_c3_series_first_term():
    sq = squarefree_system()
    dv = constant_c3_series(sq, sq, 1, 10**6)
    assert dv.value == 1.0 and dv.terms_used == 1


def test_c3_series_matches_kfree():
    sq = squarefree_system()
    series = constant_c3_series(sq, sq, 2000, 10**8)
    kfree = constant_c3_kfree(2, 2, (0,), (0,), 10**5)
    assert math.isfinite(series.tail_estimate)
    assert abs(series.value - kfree.value) <= series.tail_estimate + kfree.tail_estimate


def test_c3_series_non_prime_power_tail_unbounded():
    ex = SieveSystem(GeneratorFamily.explicit([6, 35]), (0,))
    dv = constant_c3_series(ex, ex, 50, 100)
    assert dv.tail_estimate == math.inf


# --------------------------------------------------------------- counts


@pytest.mark.parametrize("x, expected", [(30, 19), (100, 61), (10**6, 607926), (0, 0)])
def test_count_V_squarefree(x, expected):
    assert count_V(x, squarefree_system()) == expected


def test_count_V_inclusion_exclusion_oracle():
    x = 10**6
    mu = mobius_up_to(1000)
    ie = sum(int(mu[d]) * (x // (d * d)) for d in range(1, 1001))
    assert ie == count_V(x, squarefree_system())


@pytest.mark.parametrize("x, expected", [(30, 361), (100, 3721)])
def test_count_V2(x, expected):
    sq = squarefree_system()
    assert count_V2(x, sq, sq) == expected


def test_count_V2_boundary():
    sq = squarefree_system()
    assert count_V2(1, sq, sq) == 1
    assert count_V2(1, sq, squarefree_system((0, 1))) == 0


def test_count_V3_examples(k2_h101):
    sq = squarefree_system()
    assert count_V3(1, sq, sq) == 1
    assert count_V3(10**4, k2_h101, k2_h101) == 0
    gcd_path = count_V3(100, sq, sq, method="gcd")
    assert gcd_path == count_V3(100, sq, sq, method="mobius")
    assert count_V3(100, sq, sq, method="both") == gcd_path


def test_count_V3_brute_force():
    sq = squarefree_system()
    s01 = squarefree_system((0, 1))
    x = 120
    v1 = [m for m in range(1, x + 1) if all(m % (p * p) for p in range(2, 11))]
    v2 = [n for n in range(2, x + 1) if all(n % (p * p) and (n - 1) % (p * p) for p in range(2, 11))]
    brute = sum(1 for m in v1 for n in v2 if math.gcd(m, n) == 1)
    assert count_V3(x, sq, s01, method="both") == brute


def test_count_V3_bad_method():
    sq = squarefree_system()
    with pytest.raises(ValueError):
        count_V3(10, sq, sq, method="fast")


def test_count_matches_constant_envelope():
    sq = squarefree_system()
    c = constant_c(sq, 10**6)
    for x in (10**4, 10**5, 10**6):
        assert abs(count_V(x, sq) / x - c.value) <= 5 * x ** (-(1 - 0.5) / 2)
