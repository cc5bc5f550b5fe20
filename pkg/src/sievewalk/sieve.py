"""Sieve systems ``(G, H)``: pairwise coprime moduli ``G`` and an offset set ``H``.

An integer ``n`` survives the sieve when ``n - h`` is divisible by no ``g`` in
``G`` for every ``h`` in ``H``.  Infinite families (prime powers, small primes)
are realized up to an explicit bound; for ``SMALL_PRIMES`` that bound is the
scale ``x`` fixing the prime threshold ``exp((log x)**beta)``.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from ._arith import prime_factors, primes_up_to

__all__ = [
    "GeneratorFamily",
    "GeneratorKind",
    "GFactorization",
    "InadmissibleSystemError",
    "SieveBitmap",
    "SieveSystem",
    "enumerate_A",
    "indicator_ie",
    "kappa",
    "load_system",
    "membership",
    "mu_G",
    "nu",
    "omega",
    "realize_generators",
    "rho",
    "sieve_interval",
    "system_from_dict",
]


class InadmissibleSystemError(ValueError):
    """Some generator ``g`` has all of its residue classes occupied by ``H``."""

    def __init__(self, g: int, nu_g: int):
        self.g = g
        self.nu_g = nu_g
        super().__init__(f"offsets are not admissible: nu_{g}(H) = {nu_g} >= {g}")


class GeneratorKind(str, enum.Enum):
    EXPLICIT = "explicit"
    PRIME_POWERS = "prime_powers"
    SMALL_PRIMES = "small_primes"


def small_prime_threshold(x: float, beta: float) -> float:
    """``exp((log x)**beta)``; 1.0 when ``x <= 1``."""
    if x <= 1:
        return 1.0
    return math.exp(math.log(x) ** beta)


def _iroot(m: int, k: int) -> int:
    r = int(round(m ** (1.0 / k)))
    while r**k > m:
        r -= 1
    while (r + 1) ** k <= m:
        r += 1
    return r


@dataclass(frozen=True)
class GeneratorFamily:
    kind: GeneratorKind
    values: tuple[int, ...] = ()
    k: int | None = None
    beta: float | None = None

    def __post_init__(self):
        kind = GeneratorKind(self.kind)
        object.__setattr__(self, "kind", kind)
        if kind is GeneratorKind.EXPLICIT:
            vals = tuple(sorted(int(v) for v in self.values))
            if any(v <= 1 for v in vals):
                raise ValueError("explicit generators must be > 1")
            for i, a in enumerate(vals):
                for b in vals[i + 1 :]:
                    if math.gcd(a, b) != 1:
                        raise ValueError(f"generators {a} and {b} are not coprime")
            object.__setattr__(self, "values", vals)
        elif kind is GeneratorKind.PRIME_POWERS:
            if self.k is None or int(self.k) != self.k or self.k < 2:
                raise ValueError("prime_powers needs an integer exponent k >= 2")
            object.__setattr__(self, "k", int(self.k))
        else:
            if self.beta is None or not 0 < self.beta < 0.5:
                raise ValueError("small_primes needs 0 < beta < 1/2")

    @classmethod
    def explicit(cls, values: Iterable[int]) -> "GeneratorFamily":
        return cls(GeneratorKind.EXPLICIT, values=tuple(values))

    @classmethod
    def prime_powers(cls, k: int) -> "GeneratorFamily":
        return cls(GeneratorKind.PRIME_POWERS, k=k)

    @classmethod
    def small_primes(cls, beta: float) -> "GeneratorFamily":
        return cls(GeneratorKind.SMALL_PRIMES, beta=beta)

    def realize(self, bound: int) -> list[int]:
        """Sorted generators ``<= bound`` (small primes: primes up to the threshold at ``x = bound``)."""
        if self.kind is GeneratorKind.EXPLICIT:
            return [g for g in self.values if g <= bound]
        if self.kind is GeneratorKind.PRIME_POWERS:
            if bound < 2**self.k:
                return []
            return [int(p) ** self.k for p in primes_up_to(_iroot(int(bound), self.k))]
        return [int(p) for p in primes_up_to(math.floor(small_prime_threshold(bound, self.beta)))]

    def max_prime_for(self, bound: int) -> int:
        """Largest prime that can divide a realized generator (prime-based families)."""
        if self.kind is GeneratorKind.PRIME_POWERS:
            return _iroot(int(bound), self.k) if bound >= 1 else 0
        return math.floor(small_prime_threshold(bound, self.beta))

    def touching(self, r: int, bound: int) -> list[int]:
        """Realized generators ``g <= bound`` with ``gcd(g, r) > 1``, for ``r >= 1``."""
        if self.kind is GeneratorKind.EXPLICIT:
            return [g for g in self.values if g <= bound and math.gcd(g, r) > 1]
        pmax = self.max_prime_for(bound)
        e = self.k if self.kind is GeneratorKind.PRIME_POWERS else 1
        return [p**e for p in prime_factors(r) if p <= pmax]

    def dividing(self, m: int, bound: int) -> list[int]:
        """Realized generators ``g <= bound`` dividing ``m`` (``m != 0``)."""
        return [g for g in self.touching(m, bound) if m % g == 0]

    @property
    def default_theta(self) -> float:
        if self.kind is GeneratorKind.PRIME_POWERS:
            return 1.0 / self.k
        return 1.0

    def to_dict(self) -> dict:
        if self.kind is GeneratorKind.EXPLICIT:
            return {"kind": "explicit", "values": list(self.values)}
        if self.kind is GeneratorKind.PRIME_POWERS:
            return {"kind": "prime_powers", "k": self.k}
        return {"kind": "small_primes", "beta": self.beta}


def nu(g: int, offsets: Iterable[int]) -> int:
    """Number of residue classes modulo ``g`` occupied by ``offsets``."""
    return len({h % g for h in offsets})


def kappa(r: int, offsets: Iterable[int]) -> int:
    """Number of offsets divisible by ``r``."""
    return sum(1 for h in offsets if h % r == 0)


@dataclass(frozen=True)
class SieveSystem:
    """Generators plus distinct offsets, checked for admissibility on construction.

    Offsets keep their given order; it fixes the products ``Delta_t`` used by
    :func:`indicator_ie`.
    """

    generators: GeneratorFamily
    offsets: tuple[int, ...] = (0,)
    theta: float | None = None

    def __post_init__(self):
        offs = tuple(int(h) for h in self.offsets)
        if not offs:
            raise ValueError("offset set must be nonempty")
        if len(set(offs)) != len(offs):
            raise ValueError(f"offsets must be distinct, got {list(offs)}")
        object.__setattr__(self, "offsets", offs)
        self.check_admissible()

    @property
    def u(self) -> int:
        return len(self.offsets)

    @property
    def claimed_theta(self) -> float:
        return self.generators.default_theta if self.theta is None else self.theta

    def check_admissible(self) -> None:
        # beyond max(spread, u) every generator sees u distinct classes and u < g
        spread = max(self.offsets) - min(self.offsets)
        limit = max(spread, self.u) + 1
        fam = self.generators
        if fam.kind is GeneratorKind.EXPLICIT:
            cands = fam.values
        elif fam.kind is GeneratorKind.PRIME_POWERS:
            cands = fam.realize(limit)
        else:
            cands = [int(p) for p in primes_up_to(limit)]
        for g in cands:
            v = nu(g, self.offsets)
            if v >= g:
                raise InadmissibleSystemError(g, v)

    def nu_of(self, g: int) -> int:
        return nu(g, self.offsets)

    def to_dict(self) -> dict:
        d = {"generators": self.generators.to_dict(), "offsets": list(self.offsets)}
        if self.theta is not None:
            d["theta"] = self.theta
        return d


def system_from_dict(data: dict) -> SieveSystem:
    """Build a :class:`SieveSystem` from the JSON config layout."""
    try:
        gen = data["generators"]
        kind = GeneratorKind(gen["kind"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"bad generators entry in sieve config: {exc}") from None
    if kind is GeneratorKind.EXPLICIT:
        fam = GeneratorFamily.explicit(gen.get("values", []))
    elif kind is GeneratorKind.PRIME_POWERS:
        fam = GeneratorFamily.prime_powers(gen.get("k"))
    else:
        fam = GeneratorFamily.small_primes(gen.get("beta"))
    offsets = data.get("offsets", [0])
    if not isinstance(offsets, list) or not all(isinstance(h, int) for h in offsets):
        raise ValueError("offsets must be a list of integers")
    theta = data.get("theta")
    return SieveSystem(fam, tuple(offsets), theta)


def load_system(path: str | Path) -> SieveSystem:
    with open(path) as fh:
        return system_from_dict(json.load(fh))


def realize_generators(system: SieveSystem, bound: int) -> list[int]:
    return system.generators.realize(bound)


def rho(r: int, system: SieveSystem, bound: int) -> int:
    """Product of realized generators sharing a factor with ``r``."""
    return math.prod(system.generators.touching(r, bound))


def omega(r: int, system: SieveSystem, bound: int) -> Fraction:
    """Signed product of ``-kappa(gcd(g, r)) / g`` over generators dividing ``rho(r)``."""
    out = Fraction(1)
    for g in system.generators.touching(r, bound):
        out *= Fraction(-kappa(math.gcd(g, r), system.offsets), g)
    return out


class GFactorization(NamedTuple):
    sign: int
    generators: tuple[int, ...]


def mu_G(a: int, system: SieveSystem, bound: int | None = None) -> GFactorization | None:
    """Generalized Möbius sign of ``a``; ``None`` when ``a`` is not a product of distinct generators."""
    if a < 1:
        raise ValueError("a must be positive")
    if a == 1:
        return GFactorization(1, ())
    bound = a if bound is None else bound
    gens = system.generators.dividing(a, bound)
    rest = a
    for g in gens:
        rest //= g
    if rest != 1:
        return None
    return GFactorization((-1) ** len(gens), tuple(gens))


def enumerate_A(system: SieveSystem, bound: int, scale: int | None = None) -> list[int]:
    """All ``a <= bound`` that are 1 or a product of distinct realized generators."""
    gens = [g for g in system.generators.realize(bound if scale is None else scale) if g <= bound]
    out = [1]

    def walk(start: int, prod: int):
        for i in range(start, len(gens)):
            nxt = prod * gens[i]
            if nxt > bound:
                break
            out.append(nxt)
            walk(i + 1, nxt)

    walk(0, 1)
    return sorted(out)


def _default_bound(n: int, offsets: Sequence[int]) -> int:
    return max(abs(n - h) for h in offsets)


def membership(n: int, system: SieveSystem, bound: int | None = None) -> bool:
    """Whether ``n`` survives the sieve.

    Offsets themselves are never members.  ``bound`` is the generator
    realization bound; it defaults to ``max |n - h|``.
    """
    offs = system.offsets
    if n in offs:
        return False
    bound = _default_bound(n, offs) if bound is None else bound
    fam = system.generators
    for h in offs:
        if fam.dividing(n - h, bound):
            return False
    return True


def _a_divisors(m: int, system: SieveSystem, bound: int) -> list[tuple[int, int, tuple[int, ...]]]:
    gens = system.generators.dividing(m, bound)
    out = []
    for s in range(len(gens) + 1):
        for combo in itertools.combinations(gens, s):
            out.append((math.prod(combo), (-1) ** s, combo))
    return out


def indicator_ie(
    n: int, system: SieveSystem, bound: int | None = None, rule: str = "lemma"
) -> int:
    """Inclusion-exclusion evaluation of the sieve indicator at ``n``.

    For each offset ``h_t`` the sum runs over ``a_t`` in ``A`` dividing
    ``n - h_t``.  With ``rule="lemma"`` a choice of ``a_t`` is dropped when
    ``gcd(a_t, Delta_t)`` is a nontrivial element of ``A``, where
    ``Delta_t = prod_{i<t} (h_t - h_i)``.  That rule can miss a generator
    dividing the product ``Delta_t`` without dividing any single difference
    (e.g. ``g = 4``, ``H = (0, 4, 6)``).  ``rule="pairwise"`` instead drops
    ``a_t`` when one of its generators divides some ``h_t - h_i``, which is
    exact for every admissible system.
    """
    offs = system.offsets
    if n in offs:
        raise ValueError(f"n={n} is an offset; the identity needs n outside H")
    if rule not in ("lemma", "pairwise"):
        raise ValueError(f"unknown rule {rule!r}")
    bound = _default_bound(n, offs) if bound is None else bound
    choices = []
    for t, h in enumerate(offs):
        diffs = [h - offs[i] for i in range(t)]
        delta = math.prod(diffs)
        keep = []
        for a, sign, gens in _a_divisors(n - h, system, bound):
            if rule == "lemma":
                d = math.gcd(a, delta)
                if d != 1 and mu_G(d, system, bound) is not None:
                    continue
            elif any(x % g == 0 for g in gens for x in diffs):
                continue
            keep.append(sign)
        choices.append(keep)
    # sum over all tuples (a_1, ..., a_u) of mu_G(a_1) ... mu_G(a_u)
    return sum(math.prod(signs) for signs in itertools.product(*choices))


@dataclass
class SieveBitmap:
    """Membership bits for every integer in ``[lo, hi]``."""

    lo: int
    hi: int
    bits: np.ndarray
    bound: int = 0

    def __getitem__(self, n: int) -> bool:
        if not self.lo <= n <= self.hi:
            raise IndexError(f"{n} outside [{self.lo}, {self.hi}]")
        return bool(self.bits[n - self.lo])

    def __len__(self) -> int:
        return self.bits.size

    def count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def members(self) -> np.ndarray:
        return np.flatnonzero(self.bits) + self.lo


def sieve_interval(
    system: SieveSystem, lo: int, hi: int, bound: int | None = None
) -> SieveBitmap:
    """Segmented sieve of ``[lo, hi]``; agrees with :func:`membership` at the same ``bound``."""
    if lo > hi:
        raise ValueError("need lo <= hi")
    offs = system.offsets
    if bound is None:
        bound = max(max(abs(lo - h), abs(hi - h)) for h in offs)
    bits = np.ones(hi - lo + 1, dtype=bool)
    for g in system.generators.realize(bound):
        for h in offs:
            start = lo + (h - lo) % g
            bits[start - lo :: g] = False
    for h in offs:
        if lo <= h <= hi:
            bits[h - lo] = False
    return SieveBitmap(lo, hi, bits, bound)
