"""Seeded alpha-random walks on N and N^2 and the fraction of time spent in a sieved set.

Every trial draws from its own ``numpy`` Philox generator (a counter-based
bit generator).  Batch trial seeds come from ``SeedSequence(seed_base,
spawn_key=(i,))``, so trial ``i`` is the same whatever order or thread runs it.
"""

from __future__ import annotations

import enum
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .densities import mertens_cx
from .sieve import GeneratorFamily, SieveBitmap, SieveSystem, sieve_interval

__all__ = [
    "BatchSummary",
    "Dimension",
    "TrialResult",
    "WalkConfig",
    "WalkTarget",
    "batch_trials",
    "default_checkpoints",
    "resolve_threads",
    "run_walk",
    "subsequence_points",
    "target_1d",
    "target_2d",
    "target_smallprimes",
    "trial_seed",
    "walk_1d",
    "walk_1d_smallprimes",
    "walk_2d",
]


class Dimension(str, enum.Enum):
    ONE_D = "1d"
    TWO_D = "2d"


def subsequence_points(sigma: float, horizon: int) -> list[int]:
    """Distinct ``round(exp(m**sigma))`` for ``m = 1, 2, ...`` not exceeding ``horizon``."""
    if not 0 < sigma < 1:
        raise ValueError("sigma must lie in (0, 1)")
    out = []
    m = 1
    while True:
        k = round(math.exp(m**sigma))
        if k > horizon:
            return out
        if not out or k > out[-1]:
            out.append(k)
        m += 1


def default_checkpoints(steps: int, sigma: float = 0.5, grid: int = 100) -> tuple[int, ...]:
    """Subsequence points for ``sigma`` merged with ``grid`` evenly spaced steps."""
    pts = set(subsequence_points(sigma, steps))
    pts.update(int(v) for v in np.linspace(1, steps, min(grid, steps)).round())
    pts.add(steps)
    return tuple(sorted(p for p in pts if 1 <= p <= steps))


@dataclass(frozen=True)
class WalkConfig:
    alpha: float
    steps: int
    seed: int = 0
    dimension: Dimension = Dimension.ONE_D
    checkpoints: tuple[int, ...] | None = None

    def __post_init__(self):
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        object.__setattr__(self, "dimension", Dimension(self.dimension))
        if self.checkpoints is not None:
            cps = tuple(sorted(set(int(c) for c in self.checkpoints)))
            if cps and not (1 <= cps[0] and cps[-1] <= self.steps):
                raise ValueError("checkpoints must lie in [1, steps]")
            object.__setattr__(self, "checkpoints", cps)

    def resolved_checkpoints(self) -> tuple[int, ...]:
        if self.checkpoints is None:
            return default_checkpoints(self.steps)
        return self.checkpoints


@dataclass(frozen=True)
class TrialResult:
    final_proportion: float
    hits: int
    steps: int
    trace: tuple[tuple[int, float], ...]
    seed: int
    predicted: float | None = None

    def as_dict(self) -> dict:
        d = {
            "seed": self.seed,
            "steps": self.steps,
            "hits": self.hits,
            "final_proportion": self.final_proportion,
            "trace": [list(t) for t in self.trace],
        }
        if self.predicted is not None:
            d["predicted"] = self.predicted
        return d


@dataclass(frozen=True)
class WalkTarget:
    """Read-only membership data for walks of at most ``horizon`` steps.

    One bitmap over ``[0, horizon]`` for 1D targets; two bitmaps (one per
    coordinate) for 2D targets, optionally requiring ``gcd(x, y) = 1``.
    """

    dimension: Dimension
    horizon: int
    bitmaps: tuple[SieveBitmap, ...]
    visibility: bool = False
    predicted: float | None = None


def target_1d(system: SieveSystem, horizon: int) -> WalkTarget:
    return WalkTarget(Dimension.ONE_D, horizon, (sieve_interval(system, 0, horizon),))


def target_smallprimes(beta: float, horizon: int) -> WalkTarget:
    """Integers in ``[1, horizon]`` free of primes up to ``exp((log horizon)**beta)``.

    The prime threshold is fixed at the final horizon for every step.
    """
    system = SieveSystem(GeneratorFamily.small_primes(beta), (0,))
    bm = sieve_interval(system, 0, horizon, bound=horizon)
    return WalkTarget(
        Dimension.ONE_D, horizon, (bm,), predicted=mertens_cx(horizon, beta).value
    )


def target_2d(
    sys1: SieveSystem, sys2: SieveSystem, horizon: int, visibility: bool = False
) -> WalkTarget:
    return WalkTarget(
        Dimension.TWO_D,
        horizon,
        (sieve_interval(sys1, 0, horizon), sieve_interval(sys2, 0, horizon)),
        visibility,
    )


def _steps(config: WalkConfig) -> np.ndarray:
    rng = np.random.Generator(np.random.Philox(config.seed))
    # 53-bit uniform fractions compared against alpha
    return rng.random(config.steps) < config.alpha


def visits(config: WalkConfig, target: WalkTarget) -> np.ndarray:
    """Indicator sequence ``X_1, ..., X_n`` of the walk driven by ``config``."""
    if config.steps > target.horizon:
        raise ValueError(f"walk of {config.steps} steps exceeds target horizon {target.horizon}")
    if config.dimension is not target.dimension:
        raise ValueError("walk and target dimensions differ")
    w = _steps(config)
    if target.dimension is Dimension.ONE_D:
        pos = np.cumsum(w, dtype=np.int64)
        return target.bitmaps[0].bits[pos]
    xs = np.cumsum(w, dtype=np.int64)
    ys = np.arange(1, config.steps + 1, dtype=np.int64) - xs
    assert np.all(xs + ys == np.arange(1, config.steps + 1))
    b1, b2 = target.bitmaps
    hit = b1.bits[xs] & b2.bits[ys]
    if target.visibility:
        hit &= np.gcd(xs, ys) == 1
    return hit


def run_walk(config: WalkConfig, target: WalkTarget) -> TrialResult:
    x = visits(config, target)
    prefix = np.cumsum(x, dtype=np.int64)
    hits = int(prefix[-1])
    trace = tuple((c, int(prefix[c - 1]) / c) for c in config.resolved_checkpoints())
    return TrialResult(
        hits / config.steps, hits, config.steps, trace, config.seed, target.predicted
    )


def walk_1d(config: WalkConfig, system: SieveSystem) -> TrialResult:
    return run_walk(config, target_1d(system, config.steps))


def walk_1d_smallprimes(config: WalkConfig, beta: float) -> TrialResult:
    """Walk against the small-prime sieve at scale ``n = steps``; ``predicted`` is ``c_n``."""
    return run_walk(config, target_smallprimes(beta, config.steps))


def walk_2d(
    config: WalkConfig, sys1: SieveSystem, sys2: SieveSystem, require_visibility: bool = False
) -> TrialResult:
    return run_walk(config, target_2d(sys1, sys2, config.steps, require_visibility))


def trial_seed(seed_base: int, index: int) -> int:
    """64-bit seed of trial ``index``, a pure function of ``(seed_base, index)``."""
    ss = np.random.SeedSequence(seed_base, spawn_key=(index,))
    return int(ss.generate_state(1, np.uint64)[0])


def resolve_threads(threads: int | None = None) -> int:
    if threads is None:
        env = os.environ.get("SIEVEWALK_THREADS")
        threads = int(env) if env else (os.cpu_count() or 1)
    return max(1, int(threads))


@dataclass(frozen=True)
class BatchSummary:
    results: tuple[TrialResult, ...]
    mean: float
    variance: float
    seed_base: int
    predicted: float | None = None

    @property
    def trials(self) -> int:
        return len(self.results)

    @property
    def std_error(self) -> float:
        return math.sqrt(self.variance / self.trials)

    def as_dict(self, include_traces: bool = False) -> dict:
        rows = []
        for r in self.results:
            d = r.as_dict()
            if not include_traces:
                d.pop("trace")
            d.pop("predicted", None)
            rows.append(d)
        return {
            "seed_base": self.seed_base,
            "trials": self.trials,
            "mean": self.mean,
            "variance": self.variance,
            "std_error": self.std_error,
            "predicted": self.predicted,
            "results": rows,
        }


def summarize(results: Sequence[TrialResult], seed_base: int, predicted=None) -> BatchSummary:
    vals = [r.final_proportion for r in results]
    mean = math.fsum(vals) / len(vals)
    if len(vals) > 1:
        var = math.fsum((v - mean) ** 2 for v in vals) / (len(vals) - 1)
    else:
        var = 0.0
    return BatchSummary(tuple(results), mean, var, seed_base, predicted)


def batch_trials(
    config: WalkConfig,
    trials: int,
    seed_base: int,
    target: WalkTarget,
    threads: int | None = None,
) -> BatchSummary:
    """Independent trials sharing ``target``; mean and sample variance of the visit proportion.

    ``config.seed`` is ignored; trial ``i`` uses ``trial_seed(seed_base, i)``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    configs = [replace(config, seed=trial_seed(seed_base, i)) for i in range(trials)]
    workers = min(resolve_threads(threads), trials)
    if workers == 1:
        results = [run_walk(c, target) for c in configs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: run_walk(c, target), configs))
    return summarize(results, seed_base, target.predicted)
