"""Density constants of sieved sets and exact counts for cross-checking them.

Constants are truncated Euler products or series.  Each comes back as a
:class:`DensityValue` carrying an upper bound on the omitted tail, so test
tolerances can be read off the value itself.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._arith import mobius_up_to, prime_factors, primes_up_to
from .sieve import (
    GeneratorKind,
    InadmissibleSystemError,
    SieveSystem,
    kappa,
    nu,
    omega,
    sieve_interval,
    small_prime_threshold,
)

__all__ = [
    "DensityValue",
    "constant_c",
    "constant_c3_kfree",
    "constant_c3_series",
    "count_V",
    "count_V2",
    "count_V3",
    "f_factor",
    "mertens_cx",
]


@dataclass(frozen=True)
class DensityValue:
    value: float
    truncation_bound: int
    tail_estimate: float
    terms_used: int

    def as_dict(self) -> dict:
        return {
            "value": self.value,
            "truncation_bound": self.truncation_bound,
            "tail_estimate": self.tail_estimate,
            "terms_used": self.terms_used,
        }


def _product(factors: Iterable[float]) -> tuple[float, int]:
    """Product via summed logs (fixed ascending order); exact 0 if any factor is 0."""
    logs = []
    sign = 1
    for f in factors:
        if f == 0:
            return 0.0, len(logs) + 1
        if f < 0:
            sign = -sign
        logs.append(math.log(abs(f)))
    return sign * math.exp(math.fsum(logs)), len(logs)


def _tail_from_sum(value: float, s: float, xmax: float) -> float:
    # |1 - prod(1 - x_i)| <= 1 - exp(-sum x_i / (1 - max x_i)) for 0 <= x_i <= xmax < 1
    if s <= 0:
        return 0.0
    return abs(value) * -math.expm1(-s / (1.0 - xmax))


def constant_c(system: SieveSystem, truncation_bound: int) -> DensityValue:
    """Truncated product of ``1 - nu_g(H)/g`` over realized generators ``g <= bound``."""
    fam = system.generators
    gens = fam.realize(truncation_bound)
    value, used = _product(1.0 - system.nu_of(g) / g for g in gens)
    u = system.u
    if fam.kind is GeneratorKind.EXPLICIT:
        rest = [g for g in fam.values if g > truncation_bound]
        full, _ = _product(1.0 - system.nu_of(g) / g for g in rest)
        tail = abs(value) * (1.0 - full)
    elif fam.kind is GeneratorKind.PRIME_POWERS:
        k = fam.k
        p_hi = fam.max_prime_for(truncation_bound)
        # omitted generators are m**k with m > p_hi, each with nu_g <= u
        s = u * p_hi ** (1 - k) / (k - 1) if p_hi >= 1 else math.inf
        xmax = u / (p_hi + 1) ** k
        tail = _tail_from_sum(value, s, xmax) if xmax < 1 else abs(value)
    else:
        # the small-prime family is finite at a given scale
        tail = 0.0
    return DensityValue(value, int(truncation_bound), tail, used)


def mertens_cx(x: float, beta: float) -> DensityValue:
    """``prod (1 - 1/p)`` over primes up to ``exp((log x)**beta)``."""
    if not 0 < beta < 0.5:
        raise ValueError("beta must lie in (0, 1/2)")
    thr = math.floor(small_prime_threshold(x, beta))
    primes = primes_up_to(thr)
    value, used = _product(1.0 - 1.0 / int(p) for p in primes)
    return DensityValue(value, thr, 0.0, used)


def _kfree_ratio(p: int, k: int, offsets: Sequence[int]) -> Fraction:
    den = p**k - nu(p**k, offsets)
    if den == 0:
        raise InadmissibleSystemError(p**k, p**k)
    return Fraction(p ** (k - 1) - kappa(p, offsets), den)


def constant_c3_kfree(
    k1: int, k2: int, H1: Sequence[int], H2: Sequence[int], prime_bound: int
) -> DensityValue:
    """Euler product for the coprimality correction of two ``k``-free type sieves."""
    if k1 < 2 or k2 < 2:
        raise ValueError("k1 and k2 must be >= 2")
    H1, H2 = tuple(H1), tuple(H2)
    primes = [int(p) for p in primes_up_to(prime_bound)]
    factors = []
    for p in primes:
        f = 1 - _kfree_ratio(p, k1, H1) * _kfree_ratio(p, k2, H2)
        factors.append(float(f))
    value, used = _product(factors)
    if value == 0.0:
        return DensityValue(0.0, int(prime_bound), 0.0, used)
    # past p0 only h = 0 can be divisible by p and all offsets are distinct mod p**k
    u1, u2 = len(H1), len(H2)
    p0 = max(prime_bound, max(abs(h) for h in H1 + H2) + 1, u1, u2) + 1
    s = 0.0
    xmax = 0.0
    for p in primes_up_to(p0):
        p = int(p)
        if p > prime_bound:
            x = abs(float(_kfree_ratio(p, k1, H1) * _kfree_ratio(p, k2, H2)))
            s += x
            xmax = max(xmax, x)
    c = 1.0 / ((1 - u1 / p0**k1) * (1 - u2 / p0**k2))
    s += c / p0
    xmax = max(xmax, c / p0**2)
    return DensityValue(value, int(prime_bound), _tail_from_sum(value, s, xmax), used)


def _divisors_of_squarefree(primes: Sequence[int]) -> list[int]:
    out = [1]
    for p in primes:
        out += [d * p for d in out]
    return out


def f_factor(r: int, system: SieveSystem, gen_bound: int) -> Fraction:
    """The per-system weight of squarefree ``r`` in the ``c_3`` series.

    Product of ``(1 - nu_g/g)**-1`` over generators sharing a factor with
    ``r``, times ``sum d * omega(d)`` over ``d`` dividing ``gcd(r, prod H)``
    (every ``d | r`` when ``0`` is an offset).  Only prime-power families give
    the usual density interpretation; other families are evaluated as written.
    """
    corr = Fraction(1)
    for g in system.generators.touching(r, gen_bound):
        corr *= Fraction(g, g - system.nu_of(g))
    D = math.gcd(r, math.prod(system.offsets))
    total = sum(
        (d * omega(d, system, gen_bound) for d in _divisors_of_squarefree(prime_factors(D))),
        Fraction(0),
    )
    return corr * total


def _sum_tau_tail(T: int, K: int) -> float:
    """Upper bound for ``sum_{r > T} K**omega(r) / r**2`` over squarefree ``r``.

    Uses ``sum_{r <= t} tau_K(r) <= t (1 + log t)**(K - 1)`` and partial summation.
    """
    L = 1.0 + math.log(T)
    m = K - 1
    return 2.0 / T * sum(math.perm(m, j) * L ** (m - j) for j in range(m + 1))


def _prime_weight(p: int, system: SieveSystem) -> float:
    # f_factor(p) for an untruncated prime-power family, in closed form
    k = system.generators.k
    g = p**k
    return g / (g - system.nu_of(g)) * (1.0 - kappa(p, system.offsets) / p ** (k - 1))


def _series_tail(
    sys1: SieveSystem, sys2: SieveSystem, r_bound: int, gen_bound: int, horizon: int = 64
) -> float:
    kinds = {sys1.generators.kind, sys2.generators.kind}
    if kinds != {GeneratorKind.PRIME_POWERS}:
        return math.inf
    T = r_bound * horizon
    big = max(abs(h) for h in sys1.offsets + sys2.offsets) + 2
    if T < big:
        return math.inf
    primes = primes_up_to(T)
    weight = np.ones(T + 1)
    lam_max = 0.0
    for p in primes:
        p = int(p)
        lam = abs(_prime_weight(p, sys1) * _prime_weight(p, sys2))
        lam_max = max(lam_max, lam)
        weight[p::p] *= lam
    mu = mobius_up_to(T)
    r = np.arange(T + 1, dtype=np.float64)
    sel = slice(r_bound + 1, T + 1)
    explicit = math.fsum((weight[sel] * (mu[sel] != 0)) / r[sel] ** 2)
    # primes above T have |f1 f2| <= c (only h = 0 divisible, all offsets distinct mod p**k)
    u1, u2 = sys1.u, sys2.u
    k1, k2 = sys1.generators.k, sys2.generators.k
    c = 1.0 / ((1 - u1 / T**k1) * (1 - u2 / T**k2))
    K = max(1, math.ceil(max(c, lam_max)))
    return explicit + _sum_tau_tail(T, K)


def constant_c3_series(
    sys1: SieveSystem, sys2: SieveSystem, r_bound: int, gen_bound: int
) -> DensityValue:
    """Partial sum over squarefree ``r <= r_bound`` of ``mu(r) f1(r) f2(r) / r**2``.

    The tail bound is finite only when both systems use prime-power
    generators, where ``f1 f2`` is multiplicative; otherwise it is ``inf``.
    """
    mu = mobius_up_to(r_bound)
    terms = []
    for r in range(1, r_bound + 1):
        m = int(mu[r])
        if m == 0:
            continue
        t = m * f_factor(r, sys1, gen_bound) * f_factor(r, sys2, gen_bound) / (r * r)
        terms.append(float(t))
    value = math.fsum(terms)
    tail = _series_tail(sys1, sys2, r_bound, gen_bound)
    return DensityValue(value, int(r_bound), tail, len(terms))


def count_V(x: int, system: SieveSystem, bound: int | None = None) -> int:
    """Exact number of sieve survivors in ``[1, x]``."""
    if x < 1:
        return 0
    return sieve_interval(system, 1, x, bound).count()


def count_V2(x: int, sys1: SieveSystem, sys2: SieveSystem) -> int:
    """Lattice points ``(m, n)`` in ``[1, x]**2`` with ``m`` in ``V1`` and ``n`` in ``V2``."""
    return count_V(x, sys1) * count_V(x, sys2)


def _count_v3_gcd(b1: np.ndarray, b2: np.ndarray, chunk: int = 1 << 22) -> int:
    m1 = np.flatnonzero(b1) + 1
    m2 = np.flatnonzero(b2) + 1
    if m1.size == 0 or m2.size == 0:
        return 0
    total = 0
    rows = max(1, chunk // m2.size)
    for i in range(0, m1.size, rows):
        block = np.gcd(m1[i : i + rows, None], m2[None, :])
        total += int(np.count_nonzero(block == 1))
    return total


def _count_v3_mobius(b1: np.ndarray, b2: np.ndarray, x: int) -> int:
    mu = mobius_up_to(x)
    total = 0
    for r in np.flatnonzero(mu):
        r = int(r)
        c1 = int(np.count_nonzero(b1[r - 1 :: r]))
        if c1 == 0:
            continue
        total += int(mu[r]) * c1 * int(np.count_nonzero(b2[r - 1 :: r]))
    return total


def count_V3(x: int, sys1: SieveSystem, sys2: SieveSystem, method: str = "mobius") -> int:
    """Coprime pairs ``(m, n)`` in ``[1, x]**2`` with ``m`` in ``V1``, ``n`` in ``V2``.

    ``method`` is ``"gcd"`` (pair scan), ``"mobius"`` (sum over ``r`` of
    ``mu(r)`` times multiples of ``r`` in each set) or ``"both"``, which
    raises if the two disagree.
    """
    if x < 1:
        return 0
    b1 = sieve_interval(sys1, 1, x).bits
    b2 = sieve_interval(sys2, 1, x).bits
    if method == "gcd":
        return _count_v3_gcd(b1, b2)
    if method == "mobius":
        return _count_v3_mobius(b1, b2, x)
    if method == "both":
        a, b = _count_v3_gcd(b1, b2), _count_v3_mobius(b1, b2, x)
        if a != b:
            raise AssertionError(f"pair scan gives {a} but Möbius sum gives {b}")
        return a
    raise ValueError(f"unknown method {method!r}")
