"""Command-line experiment harness.

    balcut run --graph two-moons:n=2000,k=10,seed=1 --balance cheeger \\
        --c-sweep 0,0.5,1 --random-inits 99 --spectral --out table.csv
    balcut compare-extensions --graph g.graph --format metis --random-inits 10 --spectral
    balcut oracle --graph small.txt --balance ratio-cut

Exit codes: 0 success, 1 usage, 2 input/output, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from .graph import FORMATS, Graph, GraphFormatError, read_graph, two_moons_graph
from .objective import L2, L2_SQUARED, cut_objective
from .oracle import MAX_ORACLE_VERTICES, brute_force_optimum
from .outer import CSV_HEADER, SolverConfig, initialization_pool, multi_init_run
from .setfn import RATIO_CHEEGER, RATIO_CUT, Extension

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_NUMERIC = 0, 1, 2, 3

BALANCES = {"ratio-cut": RATIO_CUT, "cheeger": RATIO_CHEEGER}
CONSTRAINTS = {"l2": L2, "l2-squared": L2_SQUARED}
COMPARE_HEADER = ("better", "equal", "worse", "ratio_of_best")


class UsageError(Exception):
    pass


@dataclass
class ExperimentSpec:
    graph: str
    format: str | None
    balance: str
    extension: str
    c_sweep: list[float]
    n_random: int
    use_spectral: bool
    mode: str
    seed: int
    out: str | None
    out_format: str
    constraint: str
    max_outer: int
    max_inner: int

    def __post_init__(self):
        if not self.c_sweep:
            raise UsageError("--c-sweep must list at least one value")
        if any(c < 0 for c in self.c_sweep):
            raise UsageError("--c-sweep values must be nonnegative")
        if self.n_random < 1:
            raise UsageError("--random-inits must be at least 1")
        if self.mode == "cut-monotone" and any(self.c_sweep):
            raise UsageError("--mode cut-monotone requires --c-sweep 0")

    def config(self, c: float) -> SolverConfig:
        return SolverConfig(cS=c, constraint=CONSTRAINTS[self.constraint], mode=self.mode,
                            seed=self.seed, max_outer=self.max_outer, max_inner=self.max_inner)

    def describe(self) -> dict:
        return {k: getattr(self, k) for k in (
            "graph", "format", "balance", "extension", "c_sweep", "n_random", "use_spectral",
            "mode", "seed", "constraint", "max_outer", "max_inner")}


def load_graph(source: str, format: str | None) -> Graph:
    """A file path, or ``two-moons:n=...,k=...,seed=...[,sigma=...,noise=...]``."""
    if source.startswith("two-moons"):
        _, _, args = source.partition(":")
        params = {"n": 2000, "k": 10, "seed": 1, "sigma": None, "noise": 0.1}
        for item in filter(None, args.split(",")):
            key, sep, val = item.partition("=")
            if not sep or key not in params:
                raise UsageError(f"bad two-moons parameter {item!r}")
            try:
                params[key] = int(val) if key in ("n", "k", "seed") else float(val)
            except ValueError:
                raise UsageError(f"bad value for two-moons parameter {key!r}: {val!r}") from None
        try:
            return two_moons_graph(**params)[0]
        except ValueError as err:
            raise UsageError(str(err)) from None
    return read_graph(source, format)


def _extension(balance: str, kind: str) -> Extension:
    try:
        return Extension(BALANCES[balance], kind)
    except ValueError as err:
        raise UsageError(str(err)) from None


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="") as fh:
            fh.write(text)


def cmd_run(spec: ExperimentSpec) -> int:
    g = load_graph(spec.graph, spec.format)
    obj = cut_objective(g, _extension(spec.balance, spec.extension))
    constraint = CONSTRAINTS[spec.constraint]
    pool = initialization_pool(g, obj, spec.n_random, spec.use_spectral, spec.seed, constraint)
    rows = []
    for c in spec.c_sweep:
        report = multi_init_run(g, obj, spec.config(c), spec.n_random, spec.use_spectral, pool=pool)
        rows.append((c, report))

    if spec.out_format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for c, report in rows:
            w.writerow(report.csv_row(c))
        text = buf.getvalue()
    else:
        doc = {"experiment": spec.describe(),
               "rows": [dict(c=c, best_set_size=int(r.best_set.sum()), **r.to_dict())
                        for c, r in rows]}
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    _emit(text, spec.out)
    return EXIT_OK


def cmd_compare_extensions(spec: ExperimentSpec) -> int:
    """Lovász versus mean extension of the ratio-cut balance on shared starts."""
    g = load_graph(spec.graph, spec.format)
    lovasz = cut_objective(g, Extension(RATIO_CUT, "lovasz"))
    mean = cut_objective(g, Extension(RATIO_CUT, "mean"))
    constraint = CONSTRAINTS[spec.constraint]
    pool = initialization_pool(g, lovasz, spec.n_random, spec.use_spectral, spec.seed, constraint)
    cfg = spec.config(spec.c_sweep[0])
    rep_l = multi_init_run(g, lovasz, cfg, spec.n_random, spec.use_spectral, pool=pool)
    rep_m = multi_init_run(g, mean, cfg, spec.n_random, spec.use_spectral, pool=pool)
    diff = rep_l.ratios - rep_m.ratios
    better = int(np.sum(diff < -1e-10))
    worse = int(np.sum(diff > 1e-10))
    equal = len(diff) - better - worse
    ratio_of_best = rep_l.best / rep_m.best

    if spec.out_format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(COMPARE_HEADER)
        w.writerow([better, equal, worse, repr(ratio_of_best)])
        text = buf.getvalue()
    else:
        doc = {"experiment": spec.describe(), "better": better, "equal": equal, "worse": worse,
               "ratio_of_best": ratio_of_best,
               "lovasz": rep_l.to_dict(traces=False), "mean": rep_m.to_dict(traces=False)}
        text = json.dumps(doc, sort_keys=True, indent=1) + "\n"
    _emit(text, spec.out)
    return EXIT_OK


def cmd_oracle(graph: str, format: str | None, balance: str, out: str | None = None) -> int:
    g = load_graph(graph, format)
    if g.n > MAX_ORACLE_VERTICES:
        raise UsageError(f"oracle enumeration is limited to n <= {MAX_ORACLE_VERTICES}, "
                         f"graph has n = {g.n}")
    res = brute_force_optimum(g, BALANCES[balance])
    members = ", ".join(str(i) for i in np.flatnonzero(res.best_set))
    _emit(f"{res.best_ratio!r} {{{members}}}\n", out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="balcut", description="Balanced graph cuts by RatioDCA-prox.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--graph", required=True,
                       help="graph file, or two-moons:n=2000,k=10,seed=1")
        p.add_argument("--format", choices=FORMATS, default=None,
                       help="file format (default: from the extension)")
        p.add_argument("--balance", choices=sorted(BALANCES), default="ratio-cut")
        p.add_argument("--out", default=None, help="output path (default: stdout)")

    def solver(p, constraint):
        p.add_argument("--extension", choices=("lovasz", "mean", "median"), default="lovasz")
        p.add_argument("--c-sweep", type=_float_list, default=[0.0],
                       help="proximal factors c, with c^k = c * lambda^k")
        p.add_argument("--random-inits", type=int, default=10)
        p.add_argument("--spectral", action="store_true",
                       help="add the second Laplacian eigenvector as a start")
        p.add_argument("--mode", choices=("standard", "cut-monotone"), default="standard")
        p.add_argument("--constraint", choices=sorted(CONSTRAINTS), default=constraint)
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--max-outer", type=int, default=100)
        p.add_argument("--max-inner", type=int, default=20_000)
        p.add_argument("--out-format", choices=("csv", "json"), default="csv")

    p_run = sub.add_parser("run", help="sweep proximal factors over shared starts")
    common(p_run)
    solver(p_run, "l2-squared")
    p_cmp = sub.add_parser("compare-extensions", help="Lovász vs mean extension of the ratio cut")
    common(p_cmp)
    solver(p_cmp, "l2")
    p_or = sub.add_parser("oracle", help="exact optimum by enumeration (n <= 24)")
    common(p_or)
    return parser


def _spec(args) -> ExperimentSpec:
    return ExperimentSpec(
        graph=args.graph, format=args.format, balance=args.balance, extension=args.extension,
        c_sweep=args.c_sweep, n_random=args.random_inits, use_spectral=args.spectral,
        mode=args.mode, seed=args.seed, out=args.out, out_format=args.out_format,
        constraint=args.constraint, max_outer=args.max_outer, max_inner=args.max_inner)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "oracle":
            return cmd_oracle(args.graph, args.format, args.balance, args.out)
        spec = _spec(args)
        if args.command == "run":
            return cmd_run(spec)
        return cmd_compare_extensions(spec)
    except UsageError as err:
        print(f"balcut: error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (OSError, GraphFormatError) as err:
        print(f"balcut: error: {err}", file=sys.stderr)
        return EXIT_IO
    except (ArithmeticError, ValueError, RuntimeError) as err:
        print(f"balcut: numerical failure: {err}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
