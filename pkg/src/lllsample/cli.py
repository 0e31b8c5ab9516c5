"""Command-line interface.

Exit codes: 0 success, 1 usage or parse error, 2 regime or precondition
failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys

import numpy as np

from . import io
from .core import build_formula, compute_stats, evaluate, hypergraph_coloring_formula
from .errors import LLLSampleError, PreconditionViolated, RegimeViolated
from .oracle import enumerate_solutions
from .projection import ProjectionScheme, verify_entropy_criterion
from .regimes import (
    check_projection_precondition,
    default_params,
    regime_for_instance,
    scheme_for_class,
)
from .sampler import SamplerContext, chain_rng, derive_schedule, run_glauber, run_many
from .verify import run_battery

EXIT_OK, EXIT_ERROR, EXIT_REGIME = 0, 1, 2
BENCH_HEADER = ["instance", "n", "D", "k", "step_us", "scanned", "giant", "overflow"]

log = logging.getLogger("lllsample")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load(args) -> io.InstanceDocument:
    text = _read(args.input)
    parsers = {"auto": io.parse_instance, "cnf": io.parse_dimacs_cnf,
               "hyp": io.parse_hypergraph, "acsp": io.parse_atomic_csp}
    return parsers[args.format](text)


def _alpha_beta(args, cls):
    params = default_params(cls)
    return (params.alpha if args.alpha is None else args.alpha,
            params.beta if args.beta is None else args.beta)


def _scheme(args, doc, rng):
    if getattr(args, "scheme", None):
        return io.parse_scheme(_read(args.scheme), doc.formula), "file"
    alpha, beta = _alpha_beta(args, doc.instance_class)
    return scheme_for_class(doc.formula, doc.instance_class, rng, alpha, beta,
                            delta_fail=args.eps / 4, enforce_precondition=args.mode == "strict")


def cmd_check(args) -> int:
    doc = _load(args)
    stats = compute_stats(doc.formula)
    cls = doc.instance_class
    regime = regime_for_instance(cls, stats, doc.meta, args.zeta)
    alpha, beta = _alpha_beta(args, cls)
    pre = check_projection_precondition(cls, stats, alpha, beta)
    report = {
        "class": cls,
        "kind": doc.kind,
        "stats": {"n": stats.n, "m": stats.m, "D": stats.D, "k": stats.k, "d": stats.d,
                  "q": stats.q, "log2_inv_p": stats.log2_inv_p},
        "regime": {"inequality": regime.inequality, "passed": regime.passed,
                   "lhs": regime.lhs, "rhs": regime.rhs, "margin_bits": regime.margin_bits},
        "projection": {"constructor": pre.constructor, "passed": pre.passed,
                       "failures": pre.failures},
    }
    if args.output == "json":
        print(json.dumps(report, sort_keys=True, default=str))
    else:
        s = report["stats"]
        print(f"class: {cls} ({doc.kind})")
        print(f"n={s['n']} m={s['m']} D={s['D']} k={s['k']} d={s['d']} q={s['q']} "
              f"log2(1/p)={s['log2_inv_p']:.6g}")
        print(f"regime {'PASS' if regime.passed else 'FAIL'}: {regime.inequality} "
              f"(margin {regime.margin_bits:.6g} bits)")
        print(f"projection precondition: "
              f"{pre.constructor + ' applicable' if pre.passed else 'no constructor applies'}")
    return EXIT_OK if regime.passed else EXIT_REGIME


def cmd_project(args) -> int:
    doc = _load(args)
    rng = np.random.default_rng(args.seed)
    alpha, beta = _alpha_beta(args, doc.instance_class)
    scheme, name = _scheme(args, doc, rng)
    report = verify_entropy_criterion(doc.formula, scheme, alpha, beta)
    text = io.format_scheme(scheme)
    text += f"# constructor {name}\n"
    text += "".join(f"# {line}\n" for line in report.summary().splitlines())
    _write(args, text)
    return EXIT_OK


def _write(args, text: str) -> None:
    if getattr(args, "out", None):
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def cmd_sample(args) -> int:
    doc = _load(args)
    stats = compute_stats(doc.formula)
    rng = np.random.default_rng(args.seed)
    schedule = derive_schedule(stats, args.eps, doc.instance_class, zeta=args.zeta, eta=args.eta,
                               mode=args.mode, meta=doc.meta, T=args.T, seed=args.seed)
    scheme, name = _scheme(args, doc, rng)
    reports = run_many(doc.formula, scheme, schedule, args.samples, args.workers, args.seed)
    rows = [r.assignment for r in reports]
    meta = {
        "seed": args.seed, "T": schedule.T, "schedule": schedule.as_dict(),
        "scheme": list(scheme.alphabet_sizes), "constructor": name,
        "exceptions": {"giant_component": sum(r.giant for r in reports),
                       "rejection_overflow": sum(r.overflow for r in reports)},
        "runs": [{"chain": r.chain, "giant_component": r.giant,
                  "rejection_overflow": r.overflow,
                  "satisfied": evaluate(doc.formula, list(r.assignment))} for r in reports],
    }
    _write(args, io.emit_samples(rows, args.output, meta))
    return EXIT_OK


def cmd_verify(args) -> int:
    doc = _load(args)
    if not enumerate_solutions(doc.formula).count:
        print("NoSolutions: formula has no satisfying assignment")
        return EXIT_ERROR
    rng = np.random.default_rng(args.seed)
    scheme, name = _scheme(args, doc, rng)
    results = run_battery(doc.formula, scheme, seed=args.seed, draws=args.draws,
                          chains=args.samples, workers=args.workers)
    print(f"scheme ({name}): {scheme.to_text()}")
    for r in results:
        print(r.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_ERROR


def _bench_instances(seed: int):
    """Random 3-uniform colorings and 3-CNF formulas at growing n with bounded degree."""
    rng = np.random.default_rng(seed)
    for n in (50, 100, 200, 400, 800):
        edges = []
        for _ in range(n // 2):
            edges.append(tuple(int(v) for v in rng.choice(n, 3, replace=False)))
        yield f"coloring-q4-n{n}", hypergraph_coloring_formula(n, edges, 4)
        clauses = [(rng.choice(n, 3, replace=False), rng.integers(0, 2, 3)) for _ in range(n // 2)]
        yield f"cnf3-n{n}", build_formula([2] * n, clauses)
    yield "free-n100", build_formula([2] * 100, [])


def cmd_bench(args) -> int:
    if args.input:
        doc = _load(args)
        instances = [(args.input, doc.formula)]
    else:
        instances = list(_bench_instances(args.seed))
    writer = csv.writer(sys.stdout, lineterminator="\n")
    writer.writerow(BENCH_HEADER)
    for name, formula in instances:
        stats = compute_stats(formula)
        scheme = ProjectionScheme.identity(formula)
        T = args.T if args.T is not None else 20 * formula.num_vars
        schedule = derive_schedule(stats, 0.1, "general", mode="forced", T=T)
        ctx = SamplerContext(formula, scheme)
        # first call compiles the kernels
        run_glauber(formula, scheme, dataclasses.replace(schedule, T=1), chain_rng(args.seed, 0), ctx)
        rep = run_glauber(formula, scheme, schedule, chain_rng(args.seed, 1), ctx)
        steps = max(T, 1)
        writer.writerow([name, stats.n, stats.D, stats.k,
                         f"{rep.wall_time / steps * 1e6:.4f}", f"{rep.scanned / steps:.3f}",
                         f"{1000 * rep.giant / steps:.3f}", f"{1000 * rep.overflow / steps:.3f}"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="lllsample", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p, input_required=True):
        if input_required:
            p.add_argument("input", help="instance file, or '-' for stdin")
        else:
            p.add_argument("input", nargs="?", help="instance file, or '-' for stdin")
        p.add_argument("--format", choices=["auto", "cnf", "hyp", "acsp"], default="auto")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--mode", choices=["strict", "forced"], default="strict")
        p.add_argument("--alpha", type=float)
        p.add_argument("--beta", type=float)
        p.add_argument("--zeta", type=float)
        p.add_argument("--eps", type=float, default=0.1,
                       help="target error; schemes are built with failure probability eps/4")

    p = sub.add_parser("check", help="report statistics and the regime inequality")
    common(p)
    p.add_argument("--output", choices=["text", "json"], default="text")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("project", help="construct a projection scheme")
    common(p)
    p.add_argument("--out", help="write the scheme here instead of stdout")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("sample", help="draw approximate uniform solutions")
    common(p)
    p.add_argument("--eta", type=float)
    p.add_argument("--T", type=int)
    p.add_argument("--samples", type=int, default=1)
    p.add_argument("--scheme", help="scheme file from 'project'")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", choices=["lines", "json"], default="lines")
    p.add_argument("--out", help="write samples here instead of stdout")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("verify", help="run the oracle-backed checks on a small instance")
    common(p)
    p.add_argument("--scheme", help="scheme file from 'project'")
    p.add_argument("--samples", type=int, default=2000, help="independent chains for the end-to-end check")
    p.add_argument("--draws", type=int, default=20000, help="draws per exactness and inversion check")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bench", help="time Glauber steps and print CSV")
    common(p, input_required=False)
    p.add_argument("--T", type=int)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (RegimeViolated, PreconditionViolated) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_REGIME
    except (LLLSampleError, ValueError, OSError) as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
