"""Small arithmetic helpers shared by the sieve, density and binomial modules."""

from __future__ import annotations

import math

import numpy as np


def primes_up_to(n: int) -> np.ndarray:
    """All primes ``p <= n`` as an int64 array (Eratosthenes)."""
    if n < 2:
        return np.zeros(0, dtype=np.int64)
    is_p = np.ones(n + 1, dtype=bool)
    is_p[:2] = False
    is_p[4::2] = False
    for p in range(3, math.isqrt(n) + 1, 2):
        if is_p[p]:
            is_p[p * p :: 2 * p] = False
    return np.flatnonzero(is_p).astype(np.int64)



def mobius_up_to(n: int) -> np.ndarray:
    """Array ``mu`` of length ``n + 1`` with ``mu[k]`` the Möbius function (``mu[0] = 0``)."""
    mu = np.ones(n + 1, dtype=np.int8)
    if n >= 0:
        mu[0] = 0
    for p in primes_up_to(n):
        p = int(p)
        mu[p::p] *= -1
        mu[p * p :: p * p] = 0
    return mu


def omega_up_to(n: int) -> np.ndarray:
    """Number of distinct prime factors of each k in ``[0, n]``."""
    w = np.zeros(n + 1, dtype=np.int16)
    for p in primes_up_to(n):
        w[int(p) :: int(p)] += 1
    return w


def prime_factors(m: int) -> list[int]:
    """Distinct prime factors of ``|m|`` in ascending order (trial division)."""
    m = abs(m)
    out = []
    if m < 2:
        return out
    for p in (2, 3):
        if m % p == 0:
            out.append(p)
            while m % p == 0:
                m //= p
    f = 5
    while f * f <= m:
        for p in (f, f + 2):
            if m % p == 0:
                out.append(p)
                while m % p == 0:
                    m //= p
        f += 6
    if m > 1:
        out.append(m)
    return out


def is_squarefree(m: int) -> bool:
    m = abs(m)
    for p in prime_factors(m):
        if m % (p * p) == 0:
            return False
    return m != 0


def crt_pair(m1: int, r1: int, m2: int, r2: int) -> tuple[int, int]:
    """Combine ``x = r1 (mod m1)`` and ``x = r2 (mod m2)`` for coprime moduli."""
    inv = pow(m1, -1, m2)
    t = ((r2 - r1) * inv) % m2
    m = m1 * m2
    return m, (r1 + m1 * t) % m
