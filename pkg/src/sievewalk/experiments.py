"""Verification suites: deviation decay, density/count/walk agreement, convergence.

Each suite returns an :class:`ExperimentReport` whose rows carry everything
needed to recompute their verdicts.  All slack constants live below and are
echoed into every report.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from typing import Any, Sequence

import numpy as np

from . import __version__
from ._arith import crt_pair
from .binomial import (
    PmfParams,
    Side,
    _ap_sum_from_vector,
    check_offset_window,
    deviation_sweep,
    pmf_vector,
)
from .densities import (
    constant_c,
    constant_c3_kfree,
    constant_c3_series,
    count_V,
    count_V2,
    count_V3,
)
from .sieve import GeneratorKind, SieveSystem, enumerate_A
from .walk import (
    Dimension,
    TrialResult,
    WalkConfig,
    batch_trials,
    target_1d,
    target_2d,
)

SLOPE_SLACK = 0.15
SE_BAND = 3.0
VARIANCE_FACTOR = 10.0
COUNT_ENVELOPE = 5.0
EPS_FIXED = 0.1
MODULUS_EXPONENT = 2
D_CAP_EXPONENT = 0.1
DIAG_ENVELOPE = 2.0
DIAG_M0 = 3
DEFAULT_C_BOUND = 10**6
DEFAULT_C3_PRIME_BOUND = 10**5
# Exponents B, C with C > 3B + 3 from the second-moment argument; metadata only.
SECOND_MOMENT_B = 1.0
SECOND_MOMENT_C = 7.0

SLACKS = {
    "slope_slack": SLOPE_SLACK,
    "standard_error_band": SE_BAND,
    "variance_factor": VARIANCE_FACTOR,
    "count_envelope": COUNT_ENVELOPE,
    "eps_fixed": EPS_FIXED,
    "modulus_exponent": MODULUS_EXPONENT,
    "d_cap_exponent": D_CAP_EXPONENT,
    "diagnostic_envelope": DIAG_ENVELOPE,
    "diagnostic_m0": DIAG_M0,
}

EXPERIMENT_IDS = ("theorem1", "theorem2", "triangle", "convergence")

# How a row's verdict follows from its fields.
CHECKS = {
    "abs": lambda r: r.abs_error <= r.tolerance_used,
    "upper": lambda r: r.observed <= r.predicted + r.tolerance_used,
    "exact": lambda r: r.observed == r.predicted,
    # strictly below the previous value, or both exactly zero
    "decrease": lambda r: r.observed < r.predicted or r.observed == r.predicted == 0.0,
    "info": lambda r: True,
}


@dataclass
class ReportRow:
    label: str
    scale: float
    predicted: float
    observed: float
    tolerance_used: float
    check: str = "abs"
    abs_error: float = field(default=math.nan)
    rel_error: float = field(default=math.nan)
    passed: bool = field(default=False)
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.check not in CHECKS:
            raise ValueError(f"unknown check {self.check!r}")
        if math.isnan(self.abs_error):
            self.abs_error = abs(self.observed - self.predicted)
        if math.isnan(self.rel_error):
            self.rel_error = self.abs_error / abs(self.predicted) if self.predicted else math.inf
        self.passed = self.recompute()

    def recompute(self) -> bool:
        return bool(CHECKS[self.check](self))


CSV_COLUMNS = (
    "label",
    "scale",
    "predicted",
    "observed",
    "abs_error",
    "rel_error",
    "tolerance_used",
    "check",
    "passed",
)


@dataclass
class ExperimentReport:
    experiment_id: str
    parameters: dict
    rows: list[ReportRow] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)
    provenance: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_dict(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "parameters": self.parameters,
            "rows": [asdict(r) for r in self.rows],
            "verdict": "pass" if self.verdict else "fail",
            "notes": list(self.notes),
            "provenance": self.provenance,
        }

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(CSV_COLUMNS)
        for r in self.rows:
            w.writerow([_csv_cell(getattr(r, c)) for c in CSV_COLUMNS])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentReport":
        # errors and verdicts are derived, so recompute them from the raw fields
        derived = ("abs_error", "rel_error", "passed")
        rows = [ReportRow(**{k: v for k, v in _unjson(r).items() if k not in derived}) for r in data["rows"]]
        return cls(data["experiment_id"], data["parameters"], rows, data.get("notes", []),
                   data.get("provenance", {}))


def _csv_cell(v):
    if isinstance(v, float):
        return repr(v)
    return v


def _jsonable(obj):
    # json has no inf/nan; encode them as strings so output stays strict JSON
    if isinstance(obj, float):
        if math.isnan(obj):
            return "nan"
        if math.isinf(obj):
            return "inf" if obj > 0 else "-inf"
        return obj
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    return obj


def _unjson(obj):
    if isinstance(obj, str) and obj in ("nan", "inf", "-inf"):
        return float(obj)
    if isinstance(obj, dict):
        return {k: _unjson(v) for k, v in obj.items()}
    return obj


def provenance(timestamp: bool = True) -> dict:
    out = {
        "package": "sievewalk",
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    if timestamp:
        out["timestamp"] = time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime())
    return out


def _check_grid(x_grid: Sequence[int]) -> list[int]:
    grid = [int(x) for x in x_grid]
    if len(grid) < 3:
        raise ValueError("x_grid needs at least 3 points")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("x_grid must be strictly ascending")
    return grid


def _x_lo(x: int) -> int:
    return max(2, math.ceil(x**EPS_FIXED))


def _moduli(system: SieveSystem, x: int) -> list[int]:
    bound = x**MODULUS_EXPONENT
    scale = x if system.generators.kind is GeneratorKind.SMALL_PRIMES else None
    return enumerate_A(system, bound, scale)


def _decay_rows(grid: Sequence[int], values: Sequence[float], target_slope: float) -> list[ReportRow]:
    rows = []
    prev = math.inf
    for x, v in zip(grid, values):
        if math.isinf(prev):
            rows.append(ReportRow("deviation", x, 0.0, v, math.inf, "upper"))
        else:
            rows.append(ReportRow("deviation", x, prev, v, 0.0, "decrease"))
        prev = v
    if all(v == 0.0 for v in values):
        rows.append(ReportRow("loglog_slope", 0.0, 0.0, 0.0, 0.0, "exact"))
    elif all(v > 0.0 for v in values):
        slope = float(np.polyfit(np.log(grid), np.log(values), 1)[0])
        rows.append(ReportRow("loglog_slope", 0.0, target_slope, slope, SLOPE_SLACK, "upper"))
    else:
        rows.append(ReportRow("loglog_slope", 0.0, target_slope, math.nan, SLOPE_SLACK, "upper"))
    return rows


def run_theorem1_suite(
    alpha: float,
    system: SieveSystem,
    x_grid: Sequence[int],
    theta_claimed: float | None = None,
    h: int = 0,
    side: Side | str = Side.LEFT,
    timestamp: bool = True,
) -> ExperimentReport:
    """Averaged single-modulus deviations over the product set ``A`` at each scale.

    For each ``x`` the moduli are all ``a <= x**2`` in ``A`` and ``n`` runs over
    ``[x**0.1, x]``.  Rows must decrease along the grid and the fitted log-log
    slope must not exceed ``-(1 - theta)/2 + SLOPE_SLACK``.
    """
    grid = _check_grid(x_grid)
    side = Side(side)
    theta = system.claimed_theta if theta_claimed is None else theta_claimed
    for x in grid:
        check_offset_window(h, _x_lo(x), alpha, side)
    values, sizes = [], []
    for x in grid:
        moduli = _moduli(system, x)
        sizes.append(len(moduli))
        values.append(deviation_sweep(_x_lo(x), x, alpha, moduli, h, side).value)
    rows = _decay_rows(grid, values, -(1 - theta) / 2)
    for row, size in zip(rows, sizes):
        row.extra["moduli"] = size
    params = {
        "alpha": alpha,
        "system": system.to_dict(),
        "theta_claimed": theta,
        "x_grid": grid,
        "h": h,
        "side": side.value,
        "slacks": SLACKS,
    }
    return ExperimentReport("theorem1", params, rows, provenance=provenance(timestamp))


def _coprime_tuples(sets: Sequence[Sequence[int]], cap: int) -> list[tuple[int, ...]]:
    out = []

    def rec(i, prod, acc):
        if i == len(sets):
            out.append(tuple(acc))
            return
        for a in sets[i]:
            if prod * a > cap:
                break
            if math.gcd(a, prod) == 1:
                rec(i + 1, prod * a, acc + [a])

    rec(0, 1, [])
    return out


def _d_set(n: int, policy: str) -> list[int]:
    """``D_n``: ``{1}`` or the divisors of ``n`` up to ``n**0.1``."""
    if policy == "none":
        return [1]
    if policy == "divisors":
        cap = math.floor(n**D_CAP_EXPONENT)
        return [d for d in range(1, cap + 1) if n % d == 0]
    raise ValueError(f"unknown d_policy {policy!r}")


def _inverse_table(d: int) -> np.ndarray:
    tab = np.zeros(d, dtype=np.int64)
    for r in range(d):
        if math.gcd(r, d) == 1:
            tab[r] = pow(r, -1, d)
    return tab


def multi_moduli_sweep(
    x_lo: int,
    x_hi: int,
    alpha: float,
    tuples: Sequence[tuple[int, ...]],
    offsets: Sequence[int],
    side: Side | str = Side.LEFT,
    d_policy: str = "none",
    nu: int = 0,
) -> float:
    """``(1/x_hi) sum_n sum_d sum_tuples |mass(l = v (mod a), l = nu (mod d)) - 1/(d prod a)|``."""
    side = Side(side)
    M = np.array([math.prod(t) for t in tuples], dtype=np.int64)
    # W solves W = h_i (mod a_i); the right side uses n - W
    W = np.empty(len(tuples), dtype=np.int64)
    for j, t in enumerate(tuples):
        m, r = 1, 0
        for a, h in zip(t, offsets):
            m, r = crt_pair(m, r, a, h % a)
        W[j] = r
    inv_tables: dict[int, np.ndarray] = {}
    per_n = []
    for n in range(x_lo, x_hi + 1):
        vec = pmf_vector(PmfParams(n, alpha))
        base = W if side is Side.LEFT else np.mod(n - W, M)
        devs = []
        for d in _d_set(n, d_policy):
            if d == 1:
                mods, res = M, base
            else:
                ok = np.gcd(M, d) == 1
                if not np.any(ok):
                    continue
                tab = inv_tables.setdefault(d, _inverse_table(d))
                m_sel, v_sel = M[ok], base[ok]
                t = np.mod((nu - v_sel) * tab[np.mod(m_sel, d)], d)
                mods, res = m_sel * d, v_sel + m_sel * t
            inv = 1.0 / mods
            small = mods <= n
            dv = np.empty(mods.size)
            for i in np.flatnonzero(small):
                dv[i] = abs(_ap_sum_from_vector(vec, 0, int(mods[i]), int(res[i])) - inv[i])
            big = ~small
            rb = res[big]
            dv[big] = np.abs(np.where(rb <= n, vec[np.minimum(rb, n)], 0.0) - inv[big])
            # modulus 1 carries the whole mass, 1 exactly
            dv[mods == 1] = 0.0
            devs.append(dv)
        per_n.append(math.fsum(np.concatenate(devs)) if devs else 0.0)
    return math.fsum(per_n) / x_hi


def run_theorem2_suite(
    alpha: float,
    systems: Sequence[SieveSystem],
    x_grid: Sequence[int],
    offsets: Sequence[int] | None = None,
    d_policy: str = "none",
    side: Side | str = Side.LEFT,
    theta_claimed: float | None = None,
    timestamp: bool = True,
) -> ExperimentReport:
    """Averaged deviations over coprime modulus tuples ``(a_1, ..., a_u)`` with an extra ``d``.

    Tuples are all pairwise coprime choices from the per-system product sets
    with ``prod a <= x**2``.  ``d_policy="divisors"`` adds ``d | n`` with
    ``d <= n**0.1`` and residue ``0 mod d``.
    """
    grid = _check_grid(x_grid)
    side = Side(side)
    u = len(systems)
    if u < 1:
        raise ValueError("need at least one system")
    offsets = [0] * u if offsets is None else [int(h) for h in offsets]
    if len(offsets) != u:
        raise ValueError(f"expected {u} offsets, got {len(offsets)}")
    for x in grid:
        for h in offsets:
            check_offset_window(h, _x_lo(x), alpha, side)
    theta = max(s.claimed_theta for s in systems) if theta_claimed is None else theta_claimed
    values, sizes, notes = [], [], []
    used_grid = []
    for x in grid:
        tuples = _coprime_tuples([_moduli(s, x) for s in systems], x**MODULUS_EXPONENT)
        if not tuples:
            notes.append(f"x={x}: empty tuple pool, row skipped")
            continue
        used_grid.append(x)
        sizes.append(len(tuples))
        values.append(multi_moduli_sweep(_x_lo(x), x, alpha, tuples, offsets, side, d_policy))
    rows = _decay_rows(used_grid, values, -(1 - theta) / (2 * u))
    for row, size in zip(rows, sizes):
        row.extra["tuples"] = size
    params = {
        "alpha": alpha,
        "systems": [s.to_dict() for s in systems],
        "offsets": offsets,
        "d_policy": d_policy,
        "theta_claimed": theta,
        "x_grid": grid,
        "side": side.value,
        "slacks": SLACKS,
    }
    return ExperimentReport("theorem2", params, rows, notes, provenance(timestamp))


@dataclass(frozen=True)
class TriangleSpec:
    """Target of a triangle run: one 1D system, or two systems on the lattice."""

    system: SieveSystem
    system2: SieveSystem | None = None
    visibility: bool = False

    @property
    def dimension(self) -> Dimension:
        return Dimension.ONE_D if self.system2 is None else Dimension.TWO_D

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"system": self.system.to_dict()}
        if self.system2 is not None:
            d["system2"] = self.system2.to_dict()
            d["visibility"] = self.visibility
        return d


def _c3(sys1: SieveSystem, sys2: SieveSystem):
    g1, g2 = sys1.generators, sys2.generators
    if g1.kind is GeneratorKind.PRIME_POWERS and g2.kind is GeneratorKind.PRIME_POWERS:
        return constant_c3_kfree(g1.k, g2.k, sys1.offsets, sys2.offsets, DEFAULT_C3_PRIME_BOUND)
    return constant_c3_series(sys1, sys2, 10**4, 10**8)


def predicted_constant(spec: TriangleSpec, bound: int = DEFAULT_C_BOUND) -> tuple[float, float]:
    """Density constant of the target and a bound on its truncation error."""
    c1 = constant_c(spec.system, bound)
    if spec.system2 is None:
        return c1.value, c1.tail_estimate
    c2 = constant_c(spec.system2, bound)
    value = c1.value * c2.value
    tail = c1.tail_estimate * c2.value + c2.tail_estimate * c1.value + c1.tail_estimate * c2.tail_estimate
    if spec.visibility:
        c3 = _c3(spec.system, spec.system2)
        tail = tail * abs(c3.value) + value * c3.tail_estimate + tail * c3.tail_estimate
        value *= c3.value
    return value, tail


def exact_ratio(spec: TriangleSpec, n: int) -> float:
    if spec.system2 is None:
        return count_V(n, spec.system) / n
    if spec.visibility:
        return count_V3(n, spec.system, spec.system2) / n**2
    return count_V2(n, spec.system, spec.system2) / n**2


def run_density_walk_triangle(
    spec: TriangleSpec,
    alphas: Sequence[float],
    n: int,
    trials: int,
    seed: int,
    threads: int | None = None,
    timestamp: bool = True,
) -> ExperimentReport:
    """Compare predicted constant, exact count ratio and Monte Carlo visit proportion.

    Per alpha: constant vs count within tail + ``COUNT_ENVELOPE * n**(-(1-theta)/2)``;
    walk mean vs count and vs constant within ``SE_BAND`` standard errors;
    sample variance within ``VARIANCE_FACTOR * n**(-(1-theta)/(2u))``.
    A vanishing constant instead demands every visit proportion be exactly 0.
    """
    if n < 10**4:
        raise ValueError("n must be >= 10**4")
    if trials < 10:
        raise ValueError("trials must be >= 10")
    systems = [spec.system] + ([spec.system2] if spec.system2 is not None else [])
    theta = max(s.claimed_theta for s in systems)
    u = max(s.u for s in systems)
    predicted, tail = predicted_constant(spec)
    ratio = exact_ratio(spec, n)
    envelope = tail + COUNT_ENVELOPE * n ** (-(1 - theta) / 2)
    rows = [ReportRow("constant_vs_count", n, predicted, ratio, envelope, "abs")]
    if spec.dimension is Dimension.ONE_D:
        target = target_1d(spec.system, n)
    else:
        target = target_2d(spec.system, spec.system2, n, spec.visibility)
    var_cap = VARIANCE_FACTOR * n ** (-(1 - theta) / (2 * u))
    degenerate = predicted == 0.0
    means = {}
    for i, a in enumerate(alphas):
        cfg = WalkConfig(float(a), n, dimension=spec.dimension, checkpoints=(n,))
        summary = batch_trials(cfg, trials, seed + i, target, threads)
        means[a] = summary.mean
        se = summary.std_error
        if degenerate:
            worst = max(r.final_proportion for r in summary.results)
            rows.append(ReportRow(f"walk_zero[alpha={a}]", n, 0.0, worst, 0.0, "exact"))
            continue
        band = SE_BAND * se
        rows.append(ReportRow(f"count_vs_walk[alpha={a}]", n, ratio, summary.mean, band, "abs",
                              extra={"std_error": se}))
        rows.append(ReportRow(f"constant_vs_walk[alpha={a}]", n, predicted, summary.mean,
                              band + rows[0].tolerance_used, "abs", extra={"std_error": se}))
        rows.append(ReportRow(f"variance[alpha={a}]", n, 0.0, summary.variance, var_cap, "upper"))
    if not degenerate:
        spread = max(abs(m - predicted) for m in means.values())
        rows.append(ReportRow("alpha_independence", n, 0.0, spread,
                              max(r.tolerance_used for r in rows if r.label.startswith("constant_vs_walk")),
                              "upper"))
    params = {
        "target": spec.to_dict(),
        "alphas": [float(a) for a in alphas],
        "n": n,
        "trials": trials,
        "seed": seed,
        "seed_per_alpha": "seed + alpha_index",
        "theta_claimed": theta,
        "constant_bound": DEFAULT_C_BOUND,
        "slacks": SLACKS,
    }
    return ExperimentReport("triangle", params, rows, provenance=provenance(timestamp))


@dataclass(frozen=True)
class SubsequenceSchedule:
    """Points ``k(m) = round(exp(m**sigma))``, keeping the first ``m`` of each distinct ``k``."""

    sigma: float
    members: tuple[tuple[int, int], ...]

    @classmethod
    def build(cls, sigma: float, horizon: int) -> "SubsequenceSchedule":
        if not 0 < sigma < 1:
            raise ValueError(f"sigma must lie in (0, 1) for a subexponential schedule, got {sigma}")
        out = []
        for m in itertools.count(1):
            k = round(math.exp(m**sigma))
            if k > horizon:
                break
            if not out or k > out[-1][1]:
                out.append((m, k))
        return cls(sigma, tuple(out))


def convergence_diagnostic(
    traces: Sequence[TrialResult], sigma: float, timestamp: bool = True
) -> ExperimentReport:
    """Scaled spread ``m |S_k(m) - mean_k(m)|`` along the subsequence schedule.

    Each row reports the trial-average of the scaled spread (the per-trial
    maximum goes in ``extra``); rows with ``m >= DIAG_M0`` must stay within
    ``DIAG_ENVELOPE``.
    """
    if not traces:
        raise ValueError("need at least one trace")
    horizon = min(t.trace[-1][0] for t in traces)
    sched = SubsequenceSchedule.build(sigma, horizon)
    maps = [dict(t.trace) for t in traces]
    notes = []
    rows = []
    longest = max(t.trace[-1][0] for t in traces)
    if longest > horizon:
        notes.append(f"schedule truncated at the shortest trace horizon {horizon}")
    for m, k in sched.members:
        if not all(k in mp for mp in maps):
            notes.append(f"k({m})={k} missing from some traces, skipped")
            continue
        vals = np.array([mp[k] for mp in maps])
        spread = m * np.abs(vals - vals.mean())
        check = "upper" if m >= DIAG_M0 else "info"
        rows.append(ReportRow(f"m={m}", k, 0.0, float(spread.mean()), DIAG_ENVELOPE, check,
                              extra={"max_over_trials": float(spread.max())}))
    params = {
        "sigma": sigma,
        "trials": len(traces),
        "horizon": horizon,
        "seeds": [t.seed for t in traces],
        "second_moment_B": SECOND_MOMENT_B,
        "second_moment_C": SECOND_MOMENT_C,
        "slacks": SLACKS,
    }
    return ExperimentReport("convergence", params, rows, notes, provenance(timestamp))
