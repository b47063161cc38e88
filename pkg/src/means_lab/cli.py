"""Command-line front end: ``means-lab {eval,decide,falsify,crossval}``.

Exit codes: 0 success, 1 crossval disagreement, 2 usage error, 3 domain error.
The default seed comes from ``MEANS_LAB_SEED`` (else 0); ``--seed`` wins.
"""
from __future__ import annotations

import argparse
import math
import os
import re
import shlex
import sys
import time

import numpy as np

from . import __version__
from . import report as rp
from .catalog import FunctionExpr
from .characterization import (
    decide_bajraktarevic,
    decide_corollary_generator,
    decide_gini_global,
    decide_gini_subinterval,
    decide_gini_two_variable,
    decide_holder,
    decide_quasiarithmetic,
    decision_margin,
)
from .convexity_lab import SearchBudget, jensen_falsify, mix_seed
from .errors import MeansLabError
from .means_core import (
    Interval,
    arithmetic_evaluator,
    bajraktarevic_evaluator,
    bajraktarevic_mean,
    gini_evaluator,
    gini_mean,
    holder_evaluator,
    holder_mean,
    quasiarithmetic_evaluator,
    quasiarithmetic_mean,
)
from .quasideviation import deviation_evaluator, deviation_mean, from_bajraktarevic, scale_split

EXIT_OK, EXIT_DISAGREE, EXIT_USAGE, EXIT_DOMAIN = 0, 1, 2, 3
MEANS = ("arithmetic", "holder", "gini", "qa", "bajraktarevic", "deviation", "scale-split")


class UsageError(Exception):
    pass


def parse_grid(text: str) -> list[float]:
    """Comma-separated numbers and ``lo:hi:step`` ranges (inclusive of ``hi`` within 1e-12).

    Values come back sorted and de-duplicated; ``lo > hi`` contributes nothing.
    """
    out = set()
    for part in (p.strip() for p in text.split(",")):
        if not part:
            continue
        bits = part.split(":")
        try:
            nums = [float(v) for v in bits]
        except ValueError as exc:
            raise UsageError(f"bad grid entry {part!r}") from exc
        if len(nums) == 1:
            out.add(nums[0] + 0.0)
            continue
        if len(nums) != 3:
            raise UsageError(f"grid range must be lo:hi:step, got {part!r}")
        lo, hi, step = nums
        if not step > 0:
            raise UsageError("grid step must be positive")
        k = 0
        while lo + k * step <= hi + 1e-12:
            out.add(round(lo + k * step, 12) + 0.0)
            k += 1
    return sorted(out)


def parse_points(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise UsageError(f"bad --points: {exc}") from exc


def _interval(text):
    try:
        return Interval.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _fexpr(text):
    try:
        return FunctionExpr.parse(text)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _require(args, *names):
    missing = [n for n in names if getattr(args, n.replace("-", "_")) is None]
    if missing:
        raise UsageError(f"--mean {args.mean} needs " + ", ".join("--" + n for n in missing))


def _generator_and_weight(args, domain):
    f = _fexpr(args.generator or "identity").generator(domain)
    p = _fexpr(args.weight or "const:1").weight(domain)
    return f, p


def _natural(args):
    fams = [_fexpr(t) for t in (args.generator, args.weight) if t]
    return Interval(0.0, math.inf) if any(e.natural_domain.lo == 0 for e in fams) else Interval(-math.inf, math.inf)


def build_mean(args, domain=None):
    """Return ``(scalar_mean, batched_evaluator, label)`` for ``--mean``."""
    m = args.mean
    if m == "arithmetic":
        return (lambda x: holder_mean(1.0, x).value if min(x) > 0 else float(np.mean(x))), arithmetic_evaluator(), m
    if m == "holder":
        _require(args, "p")
        return (lambda x: holder_mean(args.p, x).value), holder_evaluator(args.p), f"holder[{args.p:g}]"
    if m == "gini":
        _require(args, "q", "r")
        return (lambda x: gini_mean((args.q, args.r), x).value), gini_evaluator(args.q, args.r), \
            f"gini[{args.q:g},{args.r:g}]"
    domain = domain or _natural(args)
    if m == "qa":
        _require(args, "generator")
        f = _fexpr(args.generator).generator(domain)
        return (lambda x: quasiarithmetic_mean(f, x).value), quasiarithmetic_evaluator(f), f"qa[{f.name}]"
    f, p = _generator_and_weight(args, domain)
    if m == "bajraktarevic":
        _require(args, "generator")
        return (lambda x: bajraktarevic_mean(f, p, x).value), bajraktarevic_evaluator(f, p), \
            f"bajraktarevic[{f.name},{p.name}]"
    E = from_bajraktarevic(f, p)
    if m == "scale-split":
        _require(args, "alpha", "beta")
        E = scale_split(E, args.alpha, args.beta)
    return (lambda x: deviation_mean(E, x).value), deviation_evaluator(E), E.name


def _seed(args) -> int:
    if getattr(args, "seed", None) is not None:
        return int(args.seed)
    env = os.environ.get("MEANS_LAB_SEED")
    if env is None or not env.strip():
        return 0
    try:
        return int(env)
    except ValueError as exc:
        raise UsageError(f"MEANS_LAB_SEED must be an integer, got {env!r}") from exc


def _echo(argv, seed, with_seed=True) -> str:
    argv = list(argv)
    if with_seed and "--seed" not in argv and not any(a.startswith("--seed=") for a in argv):
        argv += ["--seed", str(seed)]
    return "means-lab " + shlex.join(argv)


def _budget(args, seed, n_vars=None):
    return SearchBudget(max_samples=args.budget, n_vars=n_vars or args.nvars, seed=seed)


# -- subcommands --------------------------------------------------------------


def cmd_eval(args, argv):
    seed = _seed(args)
    rep = rp.base_report(_echo(argv, seed, with_seed=False), None, __version__)
    pts = parse_points(args.points)
    scalar, _, label = build_mean(args)
    rep["mean"] = label
    rep["inputs"] = pts
    rep["value"] = float(scalar(pts))
    return rep, EXIT_OK


def _gini_decision_report(rep, q, r, interval, nvars):
    if interval is None:
        v = decide_gini_two_variable(q, r) if nvars == 2 else decide_gini_global(q, r)
        rep.update(verdict=str(v.status), case_label=None, method=v.method)
        return
    g = decide_gini_subinterval(q, r, interval.lo, interval.hi)
    rep.update(verdict=str(g.status), case_label=g.case_label, beta=g.beta_value, method=g.verdict.method)
    rep["diagnostics"] = {"gamma_second_derivative_min": g.gamma_second_derivative_min,
                          "decision_margin": decision_margin(q, r, interval.lo, interval.hi)}


def cmd_decide(args, argv):
    seed = _seed(args)
    rep = rp.base_report(_echo(argv, seed), seed, __version__)
    fam = args.family
    interval = _interval(args.interval) if args.interval else None
    if fam == "gini":
        if args.q is None or args.r is None:
            raise UsageError("decide gini needs --q and --r")
        _gini_decision_report(rep, args.q, args.r, interval, args.nvars)
        return rep, EXIT_OK
    if fam == "holder":
        if args.p is None:
            raise UsageError("decide holder needs --p")
        v = decide_holder(args.p)
    else:
        if args.generator is None:
            raise UsageError(f"decide {fam} needs --generator")
        domain = interval or _fexpr(args.generator).natural_domain
        f = _fexpr(args.generator).generator(domain)
        budget = SearchBudget(args.budget, 2, seed)
        if fam == "qa":
            v = decide_quasiarithmetic(f, domain, budget)
        elif fam == "bajraktarevic":
            p = _fexpr(args.weight or "const:1").weight(domain)
            v = decide_bajraktarevic(f, p, domain, budget)
            rep["case_label"] = v.detail.get("case_label")
            rep["beta"] = v.detail.get("beta")
        else:
            if args.alpha is None or args.beta is None:
                raise UsageError("decide scale-split needs --alpha and --beta")
            v = decide_corollary_generator(f, args.alpha, args.beta, domain, budget)
        rep["samples_used"] = v.samples_used
        rep["witness"] = rp.witness_dict(v.witness)
    rep["verdict"] = str(v.status)
    rep["method"] = v.method
    return rep, EXIT_OK


def cmd_falsify(args, argv):
    seed = _seed(args)
    rep = rp.base_report(_echo(argv, seed), seed, __version__)
    domain = _interval(args.interval)
    _, evaluator, label = build_mean(args, domain)
    v = jensen_falsify(evaluator, domain, _budget(args, seed), workers=args.workers)
    rep.update(verdict=str(v.status), witness=rp.witness_dict(v.witness), samples_used=v.samples_used)
    rep["mean"] = label
    rep["n_vars"] = args.nvars
    rep["method"] = v.method
    return rep, EXIT_OK


def _falsify_cell(evaluator, domain, budget_size, seed, nvars_list, workers):
    runs = {}
    used = 0
    for n in nvars_list:
        v = jensen_falsify(evaluator, domain, SearchBudget(budget_size, n, seed), workers=workers)
        used += v.samples_used
        runs[str(n)] = {"verdict": str(v.status), "witness": rp.witness_dict(v.witness)}
    found = any(r["witness"] is not None for r in runs.values())
    return runs, found, used


def cmd_crossval(args, argv):
    seed = _seed(args)
    rep = rp.base_report(_echo(argv, seed), seed, __version__)
    t0 = time.perf_counter()
    nvars_list = sorted({int(v) for v in str(args.nvars).split(",") if v.strip()})
    if not nvars_list or min(nvars_list) < 1:
        raise UsageError("--nvars must list positive arities")
    intervals = [_interval(t) for t in (args.interval or [])]
    cells, disagreements, skipped = [], [], []
    used = 0
    index = 0
    if args.family == "gini":
        if not intervals:
            raise UsageError("crossval gini needs at least one --interval")
        qs, rs = parse_grid(args.q_grid), parse_grid(args.r_grid)
        for dom in sorted(intervals, key=lambda d: (d.lo, d.hi)):
            if not (0 < dom.lo and math.isfinite(dom.hi)):
                raise UsageError("gini crossval intervals must satisfy 0 < a < b < inf")
            for q in qs:
                for r in rs:
                    cell_seed = mix_seed(seed, index) & 0x7FFFFFFF
                    index += 1
                    g = decide_gini_subinterval(q, r, dom.lo, dom.hi)
                    margin = decision_margin(q, r, dom.lo, dom.hi)
                    cell = {"q": q, "r": r, "a": dom.lo, "b": dom.hi, "decision": str(g.status),
                            "case_label": g.case_label, "beta": g.beta_value, "decision_margin": margin,
                            "cell_seed": cell_seed}
                    if margin < args.dead_zone:
                        cell["skipped"] = "dead-zone"
                        skipped.append([q, r, dom.lo, dom.hi])
                        cells.append(cell)
                        continue
                    runs, found, n_used = _falsify_cell(gini_evaluator(q, r), dom, args.budget, cell_seed,
                                                        nvars_list, args.workers)
                    used += n_used
                    cell["falsifier"] = runs
                    cell["agree"] = found == g.verdict.not_convex
                    if not cell["agree"]:
                        disagreements.append([q, r, dom.lo, dom.hi])
                    cells.append(cell)
    else:
        if len(intervals) != 1:
            raise UsageError("crossval holder needs exactly one --interval")
        dom = intervals[0]
        if dom.lo < 0:
            raise UsageError("holder means need a positive interval")
        for p in parse_grid(args.p_grid):
            cell_seed = mix_seed(seed, index) & 0x7FFFFFFF
            index += 1
            v = decide_holder(p)
            runs, found, n_used = _falsify_cell(holder_evaluator(p), dom, args.budget, cell_seed, nvars_list,
                                                args.workers)
            used += n_used
            cell = {"p": p, "a": dom.lo, "b": dom.hi, "decision": str(v.status), "cell_seed": cell_seed,
                    "falsifier": runs, "agree": found == v.not_convex}
            if not cell["agree"]:
                disagreements.append([p, dom.lo, dom.hi])
            cells.append(cell)
    rep["verdict"] = "agree" if not disagreements else "disagree"
    rep["samples_used"] = used
    rep["summary"] = {"cells": len(cells), "skipped": len(skipped), "disagreements": disagreements}
    rep["cells"] = cells
    if args.timing:
        rep["elapsed_ms"] = (time.perf_counter() - t0) * 1e3
    return rep, EXIT_DISAGREE if disagreements else EXIT_OK


# -- parser -------------------------------------------------------------------


def _mean_flags(p):
    p.add_argument("--mean", choices=MEANS, required=True)
    p.add_argument("--p", type=float)
    p.add_argument("--q", type=float)
    p.add_argument("--r", type=float)
    p.add_argument("--generator", help="identity | log | power:P | exp[:C] | affine:A,B")
    p.add_argument("--weight", help="as --generator, plus const:C (default const:1)")
    p.add_argument("--alpha", type=float)
    p.add_argument("--beta", type=float)


def _common(p):
    p.add_argument("--seed", type=int, help="default: $MEANS_LAB_SEED or 0")
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="means-lab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="cmd", required=True)

    pe = sub.add_parser("eval", help="evaluate a mean")
    _mean_flags(pe)
    pe.add_argument("--points", required=True, help="comma-separated inputs")
    _common(pe)

    pd = sub.add_parser("decide", help="run an analytic convexity decider")
    pd.add_argument("family", choices=("gini", "holder", "qa", "bajraktarevic", "scale-split"))
    for flag in ("--p", "--q", "--r", "--alpha", "--beta"):
        pd.add_argument(flag, type=float)
    pd.add_argument("--generator")
    pd.add_argument("--weight")
    pd.add_argument("--interval", help="lo:hi")
    pd.add_argument("--nvars", type=int, help="gini without --interval: 2 selects the two-variable rule")
    pd.add_argument("--budget", type=int, default=20_000)
    _common(pd)

    pf = sub.add_parser("falsify", help="search for a Jensen-convexity counterexample")
    _mean_flags(pf)
    pf.add_argument("--interval", required=True)
    pf.add_argument("--nvars", type=int, default=2)
    pf.add_argument("--budget", type=int, default=20_000)
    pf.add_argument("--workers", type=int, default=1)
    _common(pf)

    pc = sub.add_parser("crossval", help="compare deciders with the falsifier over a grid")
    pc.add_argument("family", choices=("gini", "holder"))
    pc.add_argument("--q-grid", default="-2:3:0.5")
    pc.add_argument("--r-grid", default="-2:3:0.5")
    pc.add_argument("--p-grid", default="-2:3:0.25")
    pc.add_argument("--interval", action="append", help="lo:hi (repeatable for gini)")
    pc.add_argument("--nvars", default="2,3", help="comma-separated arities")
    pc.add_argument("--budget", type=int, default=20_000)
    pc.add_argument("--dead-zone", type=float, default=0.03)
    pc.add_argument("--workers", type=int, default=1)
    pc.add_argument("--timing", action="store_true", help="record elapsed_ms (breaks byte-identical reruns)")
    _common(pc)
    return ap


COMMANDS = {"eval": cmd_eval, "decide": cmd_decide, "falsify": cmd_falsify, "crossval": cmd_crossval}


_NUMERIC = re.compile(r"^-[\d.]")


def _glue_negative_values(argv):
    """Let ``--q-grid -2:3:0.5`` through argparse, which would read it as a flag."""
    out = []
    i = 0
    while i < len(argv):
        tok = argv[i]
        if tok.startswith("--") and "=" not in tok and i + 1 < len(argv) and _NUMERIC.match(argv[i + 1]):
            out.append(f"{tok}={argv[i + 1]}")
            i += 2
            continue
        out.append(tok)
        i += 1
    return out


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(_glue_negative_values(argv))
    t0 = time.perf_counter()
    try:
        rep, code = COMMANDS[args.cmd](args, argv)
    except UsageError as exc:
        print(f"means-lab: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (MeansLabError, ValueError, ArithmeticError) as exc:
        print(f"means-lab: domain error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    if args.cmd != "crossval":
        rep["elapsed_ms"] = (time.perf_counter() - t0) * 1e3
    text = rp.dumps(rep)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return code


if __name__ == "__main__":
    raise SystemExit(main())
