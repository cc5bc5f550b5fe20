"""Binomial pmf evaluation and its mass over arithmetic progressions.

Float evaluation works in log space using Loader's saddle-point split of
``log C(n, l) + l log a + (n - l) log(1 - a)`` into Stirling remainders and a
deviance term.  Plain ``lgamma`` differences lose about ``1e-9`` relative
accuracy at ``n = 10**6``; this split keeps every term near full precision.

Exact evaluation uses :class:`fractions.Fraction` and serves as a test oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from ._arith import crt_pair

__all__ = [
    "EXACT_MAX_N",
    "ApSumResult",
    "CongruenceSystem",
    "ExactModeUnsupported",
    "PmfParams",
    "Side",
    "SweepResult",
    "Window",
    "ap_pmf_sum",
    "crt_pmf_sum",
    "deviation_sweep",
    "pmf",
    "pmf_mode",
    "pmf_vector",
    "tail_halfwidth",
]

EXACT_MAX_N = 2000


class ExactModeUnsupported(ValueError):
    """Exact rational evaluation was requested outside its supported range."""


class Window(str, enum.Enum):
    FULL = "full"
    TAIL = "tail"


class Side(str, enum.Enum):
    LEFT = "left"
    RIGHT = "right"


@dataclass(frozen=True)
class PmfParams:
    """Number of Bernoulli trials ``n`` and success probability ``alpha``.

    ``exact`` optionally carries ``alpha`` as a reduced fraction; it is
    required for ``exact=True`` evaluation.
    """

    n: int
    alpha: float
    exact: Fraction | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 0:
            raise ValueError(f"n must be a nonnegative integer, got {self.n!r}")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        if self.exact is not None:
            if not isinstance(self.exact, Fraction):
                raise TypeError("exact must be a fractions.Fraction")
            if abs(float(self.exact) - self.alpha) > math.ulp(self.alpha or 1.0):
                raise ValueError(
                    f"exact form {self.exact} disagrees with alpha={self.alpha!r}"
                )

    @classmethod
    def rational(cls, n: int, alpha) -> "PmfParams":
        """Build params from anything :class:`Fraction` accepts, e.g. ``"3/10"``."""
        frac = Fraction(alpha)
        return cls(n, float(frac), frac)


# Stirling-series remainders log(k!) - log(sqrt(2 pi k) (k/e)^k) for k <= 15,
# evaluated once in extended precision.
def _stirlerr_table() -> np.ndarray:
    import mpmath

    mpmath.mp.dps = 40
    out = np.zeros(16)
    for k in range(1, 16):
        val = mpmath.loggamma(k + 1) - (
            (k + mpmath.mpf(0.5)) * mpmath.log(k) - k + mpmath.log(2 * mpmath.pi) / 2
        )
        out[k] = float(val)
    return out


_STIRLERR_SMALL = _stirlerr_table()
_S0, _S1, _S2, _S3, _S4 = 1 / 12, 1 / 360, 1 / 1260, 1 / 1680, 1 / 1188


def _stirlerr(k: np.ndarray) -> np.ndarray:
    k = np.asarray(k, dtype=np.float64)
    out = np.empty_like(k)
    small = k <= 15
    out[small] = _STIRLERR_SMALL[k[small].astype(np.int64)]
    big = k[~small]
    kk = big * big
    res = np.where(
        big > 500,
        (_S0 - _S1 / kk) / big,
        np.where(
            big > 80,
            (_S0 - (_S1 - _S2 / kk) / kk) / big,
            np.where(
                big > 35,
                (_S0 - (_S1 - (_S2 - _S3 / kk) / kk) / kk) / big,
                (_S0 - (_S1 - (_S2 - (_S3 - _S4 / kk) / kk) / kk) / kk) / big,
            ),
        ),
    )
    out[~small] = res
    return out


def _bd0(x: np.ndarray, m: float) -> np.ndarray:
    """Deviance ``x log(x/m) + m - x`` without cancellation near ``x = m``."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(over="ignore", divide="ignore"):
        # m can be tiny for extreme alpha; the deviance is then +inf and the pmf 0
        out = x * np.log(x / m) + m - x
    near = np.abs(x - m) < 0.1 * (x + m)
    if np.any(near):
        xn = x[near]
        v = (xn - m) / (xn + m)
        s = (xn - m) * v
        ej = 2.0 * xn * v
        v2 = v * v
        j = 1
        while True:
            ej = ej * v2
            term = ej / (2 * j + 1)
            s = s + term
            if np.all(np.abs(term) <= 1e-17 * np.abs(s)):
                break
            j += 1
        out[near] = s
    return out


def pmf_vector(params: PmfParams, lo: int = 0, hi: int | None = None) -> np.ndarray:
    """Float pmf values for ``l = lo, ..., hi`` (inclusive; clipped to ``[0, n]``)."""
    n, a = params.n, params.alpha
    hi = n if hi is None else min(hi, n)
    lo = max(lo, 0)
    if hi < lo:
        return np.zeros(0)
    ls = np.arange(lo, hi + 1, dtype=np.float64)
    if a == 0.0 or a == 1.0:
        out = np.zeros(ls.size)
        target = 0 if a == 0.0 else n
        if lo <= target <= hi:
            out[target - lo] = 1.0
        return out
    out = np.empty(ls.size)
    q = 1.0 - a
    edge0 = ls == 0
    edgen = ls == n
    out[edge0] = math.exp(n * math.log1p(-a))
    out[edgen] = math.exp(n * math.log(a))
    mid = ~(edge0 | edgen)
    if np.any(mid):
        lm = ls[mid]
        lc = (
            _stirlerr(np.array([n]))[0]
            - _stirlerr(lm)
            - _stirlerr(n - lm)
            - _bd0(lm, n * a)
            - _bd0(n - lm, n * q)
        )
        lf = math.log(2 * math.pi) + np.log(lm) + np.log1p(-lm / n)
        out[mid] = np.exp(lc - 0.5 * lf)
    return out


def _exact_alpha(params: PmfParams) -> Fraction:
    if params.n > EXACT_MAX_N:
        raise ExactModeUnsupported(
            f"exact mode is limited to n <= {EXACT_MAX_N}, got n={params.n}"
        )
    if params.exact is None:
        return Fraction(params.alpha)
    return params.exact


def pmf(params: PmfParams, l: int, exact: bool = False) -> float | Fraction:
    """Probability that ``n`` Bernoulli(alpha) trials give exactly ``l`` successes."""
    if not 0 <= l <= params.n:
        raise ValueError(f"l={l} outside [0, {params.n}]")
    if exact:
        a = _exact_alpha(params)
        return math.comb(params.n, l) * a**l * (1 - a) ** (params.n - l)
    return float(pmf_vector(params, l, l)[0])


def pmf_mode(params: PmfParams) -> int:
    """Location ``floor(alpha (n + 1))`` of the pmf maximum."""
    if not 0.0 < params.alpha < 1.0:
        raise ValueError("pmf_mode needs 0 < alpha < 1")
    if params.exact is not None:
        return math.floor(params.exact * (params.n + 1))
    return math.floor(params.alpha * (params.n + 1))


def tail_halfwidth(n: int) -> int:
    """``ceil(sqrt(n) * ln(n))``; beyond this distance from the mode the mass is negligible."""
    if n < 2:
        return 0
    return math.ceil(math.sqrt(n) * math.log(n))


def _window_bounds(params: PmfParams, window: Window) -> tuple[int, int]:
    n = params.n
    if Window(window) is Window.FULL:
        return 0, n
    if params.alpha == 0.0:
        mode = 0
    elif params.alpha == 1.0:
        mode = n
    else:
        mode = pmf_mode(params)
    w = tail_halfwidth(n)
    return max(0, mode - w), min(n, mode + w)


@dataclass(frozen=True)
class ApSumResult:
    sum: float | Fraction
    target: Fraction
    deviation: float | Fraction
    combined_modulus: int
    combined_residue: int


def _ap_sum_from_vector(vec: np.ndarray, lo: int, a: int, v: int) -> float:
    start = (v - lo) % a
    return math.fsum(vec[start::a])


def ap_pmf_sum(
    params: PmfParams,
    a: int,
    v: int,
    window: Window | str = Window.FULL,
    exact: bool = False,
) -> ApSumResult:
    """Mass of the binomial pmf on ``l = v (mod a)`` and its gap to ``1/a``."""
    if a < 1:
        raise ValueError(f"modulus must be >= 1, got {a}")
    v %= a
    target = Fraction(1, a)
    lo, hi = _window_bounds(params, window)
    if exact:
        alpha = _exact_alpha(params)
        n = params.n
        first = lo + (v - lo) % a
        total = sum(
            (math.comb(n, l) * alpha**l * (1 - alpha) ** (n - l) for l in range(first, hi + 1, a)),
            Fraction(0),
        )
        return ApSumResult(total, target, abs(total - target), a, v)
    if a == 1 and (lo, hi) == (0, params.n):
        # the whole mass, which is 1 exactly
        return ApSumResult(1.0, target, 0.0, a, v)
    total = _ap_sum_from_vector(pmf_vector(params, lo, hi), lo, a, v)
    return ApSumResult(total, target, abs(total - float(target)), a, v)


@dataclass(frozen=True)
class CongruenceSystem:
    """Simultaneous congruences ``l = r (mod m)`` with pairwise coprime moduli."""

    congruences: tuple[tuple[int, int], ...] = ()

    def __init__(self, congruences: Iterable[Sequence[int]] = ()):
        norm = []
        for m, r in congruences:
            if m < 1:
                raise ValueError(f"modulus must be >= 1, got {m}")
            norm.append((int(m), int(r) % m))
        for i, (mi, _) in enumerate(norm):
            for mj, _ in norm[i + 1 :]:
                if math.gcd(mi, mj) != 1:
                    raise ValueError(f"moduli {mi} and {mj} are not coprime")
        object.__setattr__(self, "congruences", tuple(norm))

    def combine(self) -> tuple[int, int]:
        """Single equivalent congruence ``(M, V)`` by the Chinese remainder theorem."""
        m, r = 1, 0
        for mi, ri in self.congruences:
            m, r = crt_pair(m, r, mi, ri)
        return m, r


def crt_pmf_sum(
    params: PmfParams,
    system: CongruenceSystem,
    window: Window | str = Window.FULL,
    exact: bool = False,
) -> ApSumResult:
    m, v = system.combine()
    return ap_pmf_sum(params, m, v, window, exact)


@dataclass
class SweepResult:
    value: float
    per_n: dict[int, float] = field(default_factory=dict)
    x_lo: int = 0
    x_hi: int = 0


def check_offset_window(h: int, x_lo: int, alpha: float, side: Side | str) -> None:
    """Reject offsets outside ``h < alpha' x_lo / 2`` (``alpha' = 1 - alpha`` on the right)."""
    a_eff = alpha if Side(side) is Side.LEFT else 1.0 - alpha
    if not h < a_eff * x_lo / 2:
        raise ValueError(
            f"offset h={h} outside the admissible window h < {a_eff * x_lo / 2:g} "
            f"({Side(side).value} side, x_lo={x_lo}, alpha={alpha})"
        )


def deviation_sweep(
    x_lo: int,
    x_hi: int,
    alpha: float,
    moduli: Sequence[int],
    h: int = 0,
    side: Side | str = Side.LEFT,
) -> SweepResult:
    """Averaged absolute AP deviations over ``x_lo <= n <= x_hi``.

    Returns ``(1/x_hi) * sum_n sum_a |mass(l = v mod a) - 1/a|`` where
    ``v = h`` on the left side and ``v = n - h`` on the right side.
    """
    if x_lo < 2:
        raise ValueError("x_lo must be >= 2")
    if x_hi < x_lo:
        raise ValueError("x_hi must be >= x_lo")
    if len(moduli) == 0:
        raise ValueError("moduli must be nonempty")
    side = Side(side)
    check_offset_window(h, x_lo, alpha, side)
    mods = np.array(sorted(int(a) for a in moduli), dtype=np.int64)
    if mods[0] < 1:
        raise ValueError("moduli must be positive")
    inv = 1.0 / mods
    per_n = {}
    for n in range(x_lo, x_hi + 1):
        vec = pmf_vector(PmfParams(n, alpha))
        shift = h if side is Side.LEFT else n - h
        res = np.mod(shift, mods)
        small = mods <= n
        devs = np.empty(mods.size)
        for i in np.flatnonzero(small):
            devs[i] = abs(_ap_sum_from_vector(vec, 0, int(mods[i]), int(res[i])) - inv[i])
        # a > n: at most one l in [0, n] lies in the class
        big = ~small
        rb = res[big]
        single = np.where(rb <= n, vec[np.minimum(rb, n)], 0.0)
        devs[big] = np.abs(single - inv[big])
        devs[mods == 1] = 0.0
        per_n[n] = math.fsum(devs)
    value = math.fsum(per_n[n] for n in sorted(per_n)) / x_hi
    return SweepResult(value, per_n, x_lo, x_hi)
