"""Command-line front end: ``sievewalk {constants,count,walk,sweep,suite,verify}``.

Exit codes: 0 success or passing verdict, 1 failing verdict, 2 usage or
configuration error.  ``--format json`` is the canonical machine output;
``plain`` prints one headline number.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import replace
from typing import Sequence

from . import __version__
from .binomial import Side, deviation_sweep
from .densities import (
    constant_c,
    constant_c3_kfree,
    constant_c3_series,
    count_V,
    count_V2,
    count_V3,
    mertens_cx,
)
from .experiments import (
    ExperimentReport,
    TriangleSpec,
    _jsonable,
    convergence_diagnostic,
    predicted_constant,
    provenance,
    run_density_walk_triangle,
    run_theorem1_suite,
    run_theorem2_suite,
)
from .sieve import (
    GeneratorKind,
    InadmissibleSystemError,
    SieveSystem,
    enumerate_A,
    load_system,
)
from .walk import (
    Dimension,
    WalkConfig,
    batch_trials,
    default_checkpoints,
    target_1d,
    target_2d,
    target_smallprimes,
)

DEFAULT_PAIR_CAP = 10**4
DEFAULT_CONSTANT_BOUND = 10**6


class UsageError(Exception):
    """Bad flag combination or value; reported with exit code 2."""


def _num(text: str) -> int:
    # accept 1e6 style integers
    v = float(text)
    if v != int(v):
        raise argparse.ArgumentTypeError(f"expected an integer, got {text}")
    return int(v)


def _floats(text: str) -> list[float]:
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text: str) -> list[int]:
    return [_num(t) for t in text.split(",") if t.strip()]


def _load(path: str) -> SieveSystem:
    try:
        return load_system(path)
    except FileNotFoundError:
        raise UsageError(f"config file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"config file {path} is not valid JSON: {exc}") from None


def _two(configs: Sequence[str], what: str) -> tuple[SieveSystem, SieveSystem]:
    if len(configs) == 1:
        s = _load(configs[0])
        return s, s
    if len(configs) != 2:
        raise UsageError(f"{what} takes one or two config files, got {len(configs)}")
    return _load(configs[0]), _load(configs[1])


def _predicted(spec: TriangleSpec) -> dict:
    value, tail = predicted_constant(spec)
    return {"value": value, "tail_estimate": tail}


# ----------------------------------------------------------------- commands


def cmd_constants(args) -> tuple[dict, float, int]:
    if args.kind == "cx":
        beta = args.beta
        if args.config:
            sys_ = _load(args.config)
            if beta is None and sys_.generators.kind is GeneratorKind.SMALL_PRIMES:
                beta = sys_.generators.beta
        if beta is None:
            raise UsageError("--kind cx needs --beta or a small_primes config")
        if args.x is None:
            raise UsageError("--kind cx needs --x")
        dv = mertens_cx(args.x, beta)
        return {"kind": "cx", "x": args.x, "beta": beta, **dv.as_dict()}, dv.value, 0
    if not args.config:
        raise UsageError(f"--kind {args.kind} needs --config")
    s1 = _load(args.config)
    s2 = _load(args.config2) if args.config2 else s1
    if args.kind == "c":
        dv = constant_c(s1, args.bound or DEFAULT_CONSTANT_BOUND)
    elif args.kind == "c3_kfree":
        g1, g2 = s1.generators, s2.generators
        if GeneratorKind.SMALL_PRIMES in (g1.kind, g2.kind) or GeneratorKind.EXPLICIT in (g1.kind, g2.kind):
            raise UsageError("--kind c3_kfree needs prime_powers configs")
        dv = constant_c3_kfree(g1.k, g2.k, s1.offsets, s2.offsets, args.bound or 10**5)
    else:
        dv = constant_c3_series(s1, s2, args.bound or 10**3, args.gen_bound)
    return {"kind": args.kind, **dv.as_dict()}, dv.value, 0


def cmd_count(args) -> tuple[dict, float, int]:
    x = args.x
    if x < 1:
        raise UsageError("--x must be >= 1")
    if args.variant == "v1":
        if len(args.configs) != 1:
            raise UsageError("--variant v1 takes exactly one config file")
        s = _load(args.configs[0])
        count = count_V(x, s)
        ratio = count / x
        spec = TriangleSpec(s)
    else:
        s1, s2 = _two(args.configs, f"--variant {args.variant}")
        if args.variant == "v2":
            count = count_V2(x, s1, s2)
            spec = TriangleSpec(s1, s2)
        else:
            if args.no_mobius and x > args.pair_cap:
                raise UsageError(
                    f"--x {x} exceeds --pair-cap {args.pair_cap} and --no-mobius disables the fast path"
                )
            if args.cross_check:
                if x > args.pair_cap:
                    raise UsageError(f"--cross-check runs the pair scan; --x {x} exceeds --pair-cap {args.pair_cap}")
                method = "both"
            else:
                method = "gcd" if args.no_mobius else "mobius"
            count = count_V3(x, s1, s2, method)
            spec = TriangleSpec(s1, s2, visibility=True)
        ratio = count / x**2
    pred = _predicted(spec)
    out = {
        "variant": args.variant,
        "x": x,
        "count": count,
        "ratio": ratio,
        "predicted": pred["value"],
        "predicted_tail": pred["tail_estimate"],
        "gap": abs(ratio - pred["value"]),
    }
    return out, count, 0


def cmd_walk(args) -> tuple[dict, float, int]:
    dim = Dimension(args.dimension)
    if args.visibility and dim is Dimension.ONE_D:
        raise UsageError("--visibility cannot be combined with --dimension 1d")
    if args.trials < 1:
        raise UsageError("--trials must be >= 1")
    n = args.n
    if dim is Dimension.ONE_D:
        if len(args.configs) > 1:
            raise UsageError("--dimension 1d takes at most one config file")
        if args.beta is not None:
            if args.configs:
                raise UsageError("--beta cannot be combined with a config file")
            target = target_smallprimes(args.beta, n)
        elif args.configs:
            s = _load(args.configs[0])
            if s.generators.kind is GeneratorKind.SMALL_PRIMES and s.offsets == (0,):
                target = target_smallprimes(s.generators.beta, n)
            else:
                target = target_1d(s, n)
                target = _with_prediction(target, TriangleSpec(s))
        else:
            raise UsageError("walk needs a config file or --beta")
    else:
        if args.beta is not None:
            raise UsageError("--beta cannot be combined with --dimension 2d")
        s1, s2 = _two(args.configs, "--dimension 2d")
        target = target_2d(s1, s2, n, args.visibility)
        target = _with_prediction(target, TriangleSpec(s1, s2, args.visibility))
    cps = default_checkpoints(n) if args.traces else (n,)
    cfg = WalkConfig(args.alpha, n, dimension=dim, checkpoints=cps)
    summary = batch_trials(cfg, args.trials, args.seed, target, args.threads)
    out = {"alpha": args.alpha, "n": n, "dimension": dim.value, **summary.as_dict(args.traces)}
    return out, summary.mean, 0


def _with_prediction(target, spec: TriangleSpec):
    return replace(target, predicted=predicted_constant(spec)[0])


def cmd_sweep(args) -> tuple[dict, float, int]:
    if args.moduli is not None:
        moduli = args.moduli
        source = "list"
    else:
        s = _load(args.config)
        bound = args.modulus_bound or args.x_hi**2
        moduli = enumerate_A(s, bound)
        source = f"product set up to {bound}"
    res = deviation_sweep(args.x_lo, args.x_hi, args.alpha, moduli, args.h, args.side)
    out = {
        "alpha": args.alpha,
        "x_lo": args.x_lo,
        "x_hi": args.x_hi,
        "h": args.h,
        "side": Side(args.side).value,
        "moduli_source": source,
        "moduli_count": len(moduli),
        "value": res.value,
    }
    if args.per_n:
        out["per_n"] = {str(n): v for n, v in sorted(res.per_n.items())}
    return out, res.value, 0


def cmd_suite(args) -> tuple[ExperimentReport, str, int]:
    ts = not args.no_timestamp
    sid = args.suite_id
    if sid == "convergence" and not 0 < args.sigma < 1:
        raise UsageError(f"--sigma must lie in (0, 1), got {args.sigma}")
    if sid == "theorem1":
        if len(args.configs) != 1:
            raise UsageError("theorem1 takes exactly one config file")
        rep = run_theorem1_suite(args.alpha, _load(args.configs[0]), args.grid, args.theta, args.h,
                                 args.side, timestamp=ts)
    elif sid == "theorem2":
        if not args.configs:
            raise UsageError("theorem2 needs at least one config file")
        systems = [_load(p) for p in args.configs]
        rep = run_theorem2_suite(args.alpha, systems, args.grid, args.offsets, args.d_policy,
                                 args.side, args.theta, timestamp=ts)
    elif sid == "triangle":
        if len(args.configs) == 1:
            if args.visibility:
                raise UsageError("--visibility needs two config files")
            spec = TriangleSpec(_load(args.configs[0]))
        else:
            s1, s2 = _two(args.configs, "triangle")
            spec = TriangleSpec(s1, s2, args.visibility)
        rep = run_density_walk_triangle(spec, args.alphas, args.n, args.trials, args.seed,
                                        args.threads, timestamp=ts)
    else:
        if len(args.configs) != 1:
            raise UsageError("convergence takes exactly one config file")
        s = _load(args.configs[0])
        target = target_1d(s, args.n)
        cfg = WalkConfig(args.alpha, args.n, checkpoints=default_checkpoints(args.n, args.sigma))
        summary = batch_trials(cfg, args.trials, args.seed, target, args.threads)
        rep = convergence_diagnostic(summary.results, args.sigma, timestamp=ts)
        rep.parameters.update({"alpha": args.alpha, "n": args.n, "seed_base": args.seed})
    return rep, "pass" if rep.verdict else "fail", 0 if rep.verdict else 1


def cmd_verify(args) -> tuple[dict, str, int]:
    try:
        with open(args.report) as fh:
            data = json.load(fh)
    except FileNotFoundError:
        raise UsageError(f"report file not found: {args.report}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"report file {args.report} is not valid JSON: {exc}") from None
    try:
        rep = ExperimentReport.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"report file {args.report} does not follow the report schema: {exc}") from None
    stored = [bool(r.get("passed")) for r in data["rows"]]
    recomputed = [r.passed for r in rep.rows]
    mismatched = [r.label for r, s in zip(rep.rows, stored) if r.passed != s]
    consistent = not mismatched and (data.get("verdict") == ("pass" if rep.verdict else "fail"))
    out = {
        "experiment_id": rep.experiment_id,
        "rows": len(recomputed),
        "recomputed_verdict": "pass" if rep.verdict else "fail",
        "stored_verdict": data.get("verdict"),
        "consistent": consistent,
        "mismatched_rows": mismatched,
    }
    ok = rep.verdict and consistent
    return out, "pass" if ok else "fail", 0 if ok else 1


# ------------------------------------------------------------------- output


def _flat_csv(payload: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["key", "value"])
    for k in sorted(payload):
        v = payload[k]
        if isinstance(v, (dict, list)):
            v = json.dumps(_jsonable(v), sort_keys=True)
        elif isinstance(v, float):
            v = repr(v)
        w.writerow([k, v])
    return buf.getvalue()


def _walk_csv(payload: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["seed", "steps", "hits", "final_proportion"])
    for r in payload["results"]:
        w.writerow([r["seed"], r["steps"], r["hits"], repr(r["final_proportion"])])
    return buf.getvalue()


def render(result, headline: float | int | str, fmt: str, command: str, timestamp: bool) -> str:
    if isinstance(result, ExperimentReport):
        if fmt == "json":
            return result.to_json()
        if fmt == "csv":
            return result.to_csv()
        return ("pass" if result.verdict else "fail") + "\n"
    if fmt == "json":
        doc = {"command": command, "result": result, "provenance": provenance(timestamp)}
        return json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n"
    if fmt == "csv":
        return _walk_csv(result) if command == "walk" else _flat_csv(result)
    if isinstance(headline, float):
        return f"{headline!r}\n"
    return f"{headline}\n"


# ------------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("json", "csv", "plain"), default="json")
    common.add_argument("--output", "-o", help="write to this file instead of stdout")
    common.add_argument("--threads", type=int, default=None,
                        help="worker cap (default: SIEVEWALK_THREADS or all cores)")
    common.add_argument("--no-timestamp", action="store_true",
                        help="omit the timestamp so reruns are byte-identical")

    p = argparse.ArgumentParser(prog="sievewalk", description="Densities of sieved sets and their visit rates under alpha-random walks.")
    p.add_argument("--version", action="version", version=f"sievewalk {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("constants", parents=[common], help="density constants")
    c.add_argument("--kind", choices=("c", "cx", "c3_series", "c3_kfree"), required=True)
    c.add_argument("--config")
    c.add_argument("--config2", help="second system for c3 kinds (default: same as --config)")
    c.add_argument("--bound", type=_num, help="generator, prime or r bound depending on --kind")
    c.add_argument("--gen-bound", type=_num, default=10**8, help="generator bound inside c3_series terms")
    c.add_argument("--x", type=float, help="scale for --kind cx")
    c.add_argument("--beta", type=float, help="exponent for --kind cx")

    n = sub.add_parser("count", parents=[common], help="exact survivor counts")
    n.add_argument("configs", nargs="+")
    n.add_argument("--variant", choices=("v1", "v2", "v3"), default="v1")
    n.add_argument("--x", type=_num, required=True)
    n.add_argument("--pair-cap", type=_num, default=DEFAULT_PAIR_CAP,
                   help="largest x for the pair-scan path of v3")
    g = n.add_mutually_exclusive_group()
    g.add_argument("--no-mobius", action="store_true", help="v3 by pair scan only")
    g.add_argument("--cross-check", action="store_true", help="v3 by both paths, which must agree")

    w = sub.add_parser("walk", parents=[common], help="seeded walk trials")
    w.add_argument("configs", nargs="*")
    w.add_argument("--alpha", type=float, required=True)
    w.add_argument("--n", type=_num, required=True)
    w.add_argument("--trials", type=int, default=1)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--dimension", choices=("1d", "2d"), default="1d")
    w.add_argument("--visibility", action="store_true", help="2d only: also require gcd(x, y) = 1")
    w.add_argument("--beta", type=float, help="walk against the small-prime sieve instead of a config")
    w.add_argument("--traces", action="store_true", help="include running proportions per trial")

    s = sub.add_parser("sweep", parents=[common], help="averaged AP deviations of the binomial pmf")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--moduli", type=_ints, help="comma separated moduli")
    src.add_argument("--config", help="use the product set of this system as moduli")
    s.add_argument("--alpha", type=float, required=True)
    s.add_argument("--x-lo", type=_num, required=True)
    s.add_argument("--x-hi", type=_num, required=True)
    s.add_argument("--h", type=int, default=0)
    s.add_argument("--side", choices=("left", "right"), default="left")
    s.add_argument("--modulus-bound", type=_num, help="largest modulus with --config (default x_hi**2)")
    s.add_argument("--per-n", action="store_true", help="include the per-n breakdown")

    t = sub.add_parser("suite", parents=[common], help="run a verification suite")
    t.add_argument("suite_id", choices=("theorem1", "theorem2", "triangle", "convergence"))
    t.add_argument("configs", nargs="*")
    t.add_argument("--alpha", type=float, default=0.5)
    t.add_argument("--grid", type=_ints, default=[500, 1000, 2000])
    t.add_argument("--theta", type=float, help="override the claimed sparsity exponent")
    t.add_argument("--h", type=int, default=0)
    t.add_argument("--side", choices=("left", "right"), default="left")
    t.add_argument("--offsets", type=_ints, help="theorem2: one offset per system")
    t.add_argument("--d-policy", choices=("none", "divisors"), default="none")
    t.add_argument("--alphas", type=_floats, default=[0.2, 0.5, 0.8])
    t.add_argument("--n", type=_num, default=10**5)
    t.add_argument("--trials", type=int, default=30)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--visibility", action="store_true")
    t.add_argument("--sigma", type=float, default=0.5)

    v = sub.add_parser("verify", parents=[common], help="recompute the verdicts of a saved JSON report")
    v.add_argument("report")
    p.set_defaults(subparsers=sub.choices)
    return p


def parse_args(argv: Sequence[str] | None = None) -> argparse.Namespace:
    """Parse ``argv``, letting positionals and options mix freely after the subcommand."""
    parser = build_parser()
    argv = list(sys.argv[1:] if argv is None else argv)
    subs = parser.get_default("subparsers")
    if argv and argv[0] in subs:
        args = subs[argv[0]].parse_intermixed_args(argv[1:])
        args.command = argv[0]
        return args
    return parser.parse_args(argv)


COMMANDS = {
    "constants": cmd_constants,
    "count": cmd_count,
    "walk": cmd_walk,
    "sweep": cmd_sweep,
    "suite": cmd_suite,
    "verify": cmd_verify,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = parse_args(argv)
    try:
        result, headline, code = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"sievewalk: error: {exc}", file=sys.stderr)
        return 2
    except InadmissibleSystemError as exc:
        print(f"sievewalk: error: inadmissible system: g={exc.g}, nu_g={exc.nu_g}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"sievewalk: error: {exc}", file=sys.stderr)
        return 2
    text = render(result, headline, args.format, args.command, not args.no_timestamp)
    if args.output:
        with open(args.output, "w", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    sys.exit(main())
