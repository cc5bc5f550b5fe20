import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sievewalk._arith import crt_pair, is_squarefree, mobius_up_to, prime_factors, primes_up_to
from sievewalk.sieve import (
    GeneratorFamily,
    GeneratorKind,
    InadmissibleSystemError,
    SieveSystem,
    enumerate_A,
    indicator_ie,
    kappa,
    load_system,
    membership,
    mu_G,
    nu,
    omega,
    realize_generators,
    rho,
    sieve_interval,
    small_prime_threshold,
    system_from_dict,
)

from conftest import squarefree_system

PP2 = GeneratorFamily.prime_powers(2)


def brute_member(n, gens, offsets):
    # direct reading of the definition: n outside H and n - h not divisible by any g
    if n in offsets:
        return False
    return all((n - h) % g != 0 for g in gens for h in offsets)


# --------------------------------------------------------------- helpers


def test_primes_and_mobius():
    assert primes_up_to(30).tolist() == [2, 3, 5, 7, 11, 13, 17, 19, 23, 29]
    assert primes_up_to(1).size == 0
    mu = mobius_up_to(12)
    assert mu.tolist() == [0, 1, -1, -1, 0, -1, 1, -1, 0, 0, 1, -1, 0]


@pytest.mark.parametrize("m, expected", [(1, []), (12, [2, 3]), (97, [97]), (-30, [2, 3, 5]), (3 * 3 * 49, [3, 7])])
def test_prime_factors(m, expected):
    assert prime_factors(m) == expected


@settings(max_examples=200)
@given(st.integers(1, 10**6))
def test_squarefree_matches_mobius(m):
    assert is_squarefree(m) == all(m % (p * p) for p in range(2, math.isqrt(m) + 1))


@settings(max_examples=100)
@given(st.integers(1, 500), st.integers(1, 500), st.integers(-10**4, 10**4))
def test_crt_pair(m1, m2, x):
    if math.gcd(m1, m2) != 1:
        return
    m, r = crt_pair(m1, x % m1, m2, x % m2)
    assert m == m1 * m2 and r == x % m


# ------------------------------------------------------------ generators


@pytest.mark.parametrize(
    "family, bound, expected",
    [
        (PP2, 30, [4, 9, 25]),
        (GeneratorFamily.explicit([6, 35]), 10, [6]),
        (GeneratorFamily.prime_powers(3), 200, [8, 27, 125]),
        (PP2, 3, []),
    ],
)
def test_realize(family, bound, expected):
    assert family.realize(bound) == expected


def test_small_primes_threshold():
    fam = GeneratorFamily.small_primes(0.4)
    # log x = 1 gives threshold e
    assert small_prime_threshold(math.e, 0.4) == pytest.approx(math.e)
    assert fam.realize(math.e) == [2]
    # log x = e gives threshold exp(e**0.4) = 4.445...
    x = math.exp(math.e)
    assert small_prime_threshold(x, 0.4) == pytest.approx(math.exp(math.e**0.4))
    assert fam.realize(x) == [2, 3]


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(kind="prime_powers", k=1),
        dict(kind="small_primes", beta=0.5),
        dict(kind="small_primes", beta=0.0),
        dict(kind="explicit", values=(6, 4)),
        dict(kind="explicit", values=(1, 5)),
    ],
)
def test_family_validation(kwargs):
    with pytest.raises(ValueError):
        GeneratorFamily(**kwargs)


@pytest.mark.parametrize(
    "g, H, expected", [(4, (0, 1, 2), 3), (4, (0, 4, 8), 1), (9, (-1, 0, 1), 3)]
)
def test_nu(g, H, expected):
    assert nu(g, H) == expected


@pytest.mark.parametrize(
    "r, H, expected", [(2, (-1, 0, 1), 1), (1, (5, 6, 7, 8), 4), (3, (0, 3, 7), 2)]
)
def test_kappa(r, H, expected):
    assert kappa(r, H) == expected


def test_rho_examples():
    sq = squarefree_system()
    assert rho(1, sq, 100) == 1
    assert rho(6, sq, 100) == 36
    ex = SieveSystem(GeneratorFamily.explicit([4, 9]), (0,))
    assert rho(5, ex, 100) == 1


def test_omega_examples():
    sq = squarefree_system()
    assert omega(1, sq, 100) == 1
    assert omega(2, sq, 100) == Fraction(-1, 4)
    assert omega(6, sq, 100) == Fraction(1, 36)


def test_mu_G_examples():
    sq = squarefree_system()
    assert mu_G(1, sq).sign == 1
    assert mu_G(36, sq) == (1, (4, 9))
    assert mu_G(4 * 9 * 25, sq).sign == -1
    assert mu_G(8, sq) is None
    assert mu_G(12, sq) is None


@settings(max_examples=100)
@given(st.lists(st.sampled_from([2, 3, 5, 7, 11, 13]), min_size=0, max_size=4, unique=True),
       st.lists(st.sampled_from([17, 19, 23, 29]), min_size=0, max_size=3, unique=True))
def test_mu_G_multiplicative(ps, qs):
    sq = squarefree_system()
    a = math.prod(p * p for p in ps)
    b = math.prod(q * q for q in qs)
    assert mu_G(a * b, sq).sign == mu_G(a, sq).sign * mu_G(b, sq).sign


def test_enumerate_A_examples():
    sq = squarefree_system()
    assert enumerate_A(sq, 40) == [1, 4, 9, 25, 36]
    ex = SieveSystem(GeneratorFamily.explicit([6, 35]), (0,))
    assert enumerate_A(ex, 300) == [1, 6, 35, 210]
    assert enumerate_A(sq, 1) == [1]
    assert enumerate_A(ex, 1) == [1]


def test_enumerate_A_is_mu_G_domain():
    sq = squarefree_system()
    A = set(enumerate_A(sq, 5000))
    assert A == {a for a in range(1, 5001) if mu_G(a, sq) is not None}


# --------------------------------------------------------------- systems


def test_admissibility():
    with pytest.raises(InadmissibleSystemError) as exc:
        SieveSystem(PP2, (0, 1, 2, 3))
    assert (exc.value.g, exc.value.nu_g) == (4, 4)
    with pytest.raises(InadmissibleSystemError):
        SieveSystem(GeneratorFamily.explicit([2, 9]), (0, 1))
    SieveSystem(PP2, (-1, 0, 1))


def test_offsets_distinct():
    with pytest.raises(ValueError, match="distinct"):
        SieveSystem(PP2, (0, 0))


def test_claimed_theta_defaults():
    assert squarefree_system().claimed_theta == 0.5
    assert SieveSystem(GeneratorFamily.prime_powers(3), (0,)).claimed_theta == pytest.approx(1 / 3)
    assert SieveSystem(GeneratorFamily.small_primes(0.3), (0,)).claimed_theta == 1
    assert SieveSystem(PP2, (0,), theta=0.6).claimed_theta == 0.6


def test_config_round_trip(tmp_path):
    s = SieveSystem(GeneratorFamily.explicit([6, 35]), (0, 2), theta=0.9)
    path = tmp_path / "sys.json"
    path.write_text(json.dumps(s.to_dict()))
    assert load_system(path) == s


@pytest.mark.parametrize(
    "data", [{}, {"generators": {"kind": "nope"}}, {"generators": {"kind": "prime_powers", "k": 2}, "offsets": "0"}]
)
def test_config_errors(data):
    with pytest.raises(ValueError):
        system_from_dict(data)


def test_shipped_configs(configs_dir):
    assert load_system(configs_dir / "squarefree.json").generators.kind is GeneratorKind.PRIME_POWERS
    with pytest.raises(InadmissibleSystemError):
        load_system(configs_dir / "inadmissible.json")


# ------------------------------------------------------------ membership


@pytest.mark.parametrize(
    "n, offsets, expected", [(10, (0,), True), (12, (0,), False), (8, (0, 1), False), (0, (0,), False)]
)
def test_membership_examples(n, offsets, expected):
    assert membership(n, squarefree_system(offsets)) is expected


def test_sieve_interval_examples():
    sq = squarefree_system()
    assert sieve_interval(sq, 1, 30).count() == 19
    # n and n - 1 both squarefree; the offsets 0, 1 are excluded
    bm = sieve_interval(squarefree_system((0, 1)), 1, 10)
    assert bm.members().tolist() == [2, 3, 6, 7]
    assert [n for n in range(1, 11) if brute_member(n, [4, 9], (0, 1))] == [2, 3, 6, 7]
    bm = sieve_interval(squarefree_system((0, -1)), 1, 10)
    assert bm.members().tolist() == [1, 2, 5, 6, 10]


@pytest.mark.parametrize("offsets", [(0,), (0, 1), (-1, 0, 1), (0, 2, 5)])
def test_offset_bit_clear(offsets):
    s = squarefree_system(offsets)
    for h in offsets:
        assert not sieve_interval(s, h, h)[h]


@pytest.mark.parametrize(
    "system",
    [
        squarefree_system(),
        squarefree_system((0, 1)),
        SieveSystem(GeneratorFamily.prime_powers(3), (0, 1, 2)),
        SieveSystem(GeneratorFamily.explicit([6, 35]), (0, 2)),
        SieveSystem(GeneratorFamily.explicit([4, 9, 25, 49]), (3, -4)),
    ],
)
def test_bitmap_matches_brute_force(system):
    lo, hi = -200, 2000
    bm = sieve_interval(system, lo, hi)
    gens = system.generators.realize(bm.bound)
    assert all(bm[n] == brute_member(n, gens, system.offsets) for n in range(lo, hi + 1))


@settings(max_examples=1000, deadline=None)
@given(st.integers(1, 10**5))
def test_bitmap_agrees_with_membership(n):
    s = squarefree_system((0, 1))
    bm = _BITMAP_CACHE.setdefault("k2_01", sieve_interval(s, 1, 10**5, bound=10**5))
    assert bm[n] == membership(n, s, bound=10**5) == membership(n, s)


_BITMAP_CACHE: dict = {}


def test_small_primes_membership_bound():
    s = SieveSystem(GeneratorFamily.small_primes(0.4), (0,))
    x = 10**4
    thr = math.floor(small_prime_threshold(x, 0.4))
    bm = sieve_interval(s, 1, x, bound=x)
    primes = primes_up_to(thr).tolist()
    assert bm.members().tolist() == [n for n in range(1, x + 1) if all(n % p for p in primes)]


def test_realize_generators_alias():
    assert realize_generators(squarefree_system(), 30) == [4, 9, 25]


# --------------------------------------------------- inclusion-exclusion


FIXTURES = [
    squarefree_system(),
    squarefree_system((0, 1)),
    SieveSystem(GeneratorFamily.prime_powers(3), (0, 1, 2)),
    SieveSystem(GeneratorFamily.explicit([6, 35]), (0, 2)),
]


@pytest.mark.parametrize(
    "n, offsets, expected", [(10, (0,), 1), (12, (0,), 0), (5, (0, 1), 0), (7, (0, 1), 1)]
)
def test_indicator_examples(n, offsets, expected):
    assert indicator_ie(n, squarefree_system(offsets)) == expected


@pytest.mark.parametrize("system", FIXTURES)
@pytest.mark.parametrize("rule", ["lemma", "pairwise"])
def test_indicator_matches_membership(system, rule):
    for n in range(-60, 1500):
        if n in system.offsets:
            continue
        assert indicator_ie(n, system, rule=rule) == int(membership(n, system)), n


def test_lemma_rule_gap():
    # 4 divides Delta_3 = (6-0)(6-4) = 12 but neither 6 nor 2
    s = squarefree_system((0, 4, 6))
    assert membership(10, s) is False
    assert indicator_ie(10, s, rule="lemma") == 1
    assert indicator_ie(10, s, rule="pairwise") == 0


@settings(max_examples=300, deadline=None)
@given(st.integers(-3000, 3000), st.sampled_from([(0,), (0, 1), (0, 4, 6), (-3, 2, 5), (0, 2, 3, 8)]))
def test_pairwise_rule_exact(n, offsets):
    s = squarefree_system(offsets)
    if n in offsets:
        with pytest.raises(ValueError):
            indicator_ie(n, s)
        return
    assert indicator_ie(n, s, rule="pairwise") == int(membership(n, s))


def test_membership_bitmap_numpy_bool():
    bm = sieve_interval(squarefree_system(), 1, 10)
    assert isinstance(bm.bits, np.ndarray) and bm.bits.dtype == bool
    with pytest.raises(IndexError):
        bm[11]
