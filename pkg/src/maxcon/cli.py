"""``maxcon`` command line: generate data, fit one instance, benchmark, render reports.

Exit codes: 0 success, 2 usage error, 3 data error, 4 solver failure.
"""

import argparse
import logging
import os
import sys

import numpy as np

from . import bench
from .errors import (DegenerateDataError, InvalidArgumentError, LimitExceededError, ParseError,
                     SolverError)
from .formats import read_instance, read_matches, write_instance, write_mask, write_matches
from .model import (linearize_fundamental, linearize_homography, normalize_matches,
                    synth_hyperplane, synth_matches, theta_matrix)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_SOLVER = 0, 2, 3, 4


class UsageError(Exception):
    pass


def _fractions(text):
    try:
        vals = tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fraction list {text!r}") from None
    return vals


def _ir_flags(p):
    p.add_argument("--gamma", type=float, default=0.01)
    p.add_argument("--max-iters", type=int, default=25)
    p.add_argument("--zeta", type=float, default=1e-4)
    p.add_argument("--init", choices=["ones", "linf", "ransac"], default=None,
                   help="IR-LP/IR-QP start (default ones; linf for fundamental matrices)")


def build_parser():
    parser = argparse.ArgumentParser(prog="maxcon", description="Maximum consensus fitting toolkit")
    parser.add_argument("--config", help="key = value file mirroring the flags (flags win)")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="write a synthetic instance or match file")
    g.add_argument("--problem", choices=["hyperplane", "homography", "fundamental"],
                   default="hyperplane")
    g.add_argument("--n", type=int, default=250)
    g.add_argument("--d", type=int, default=8)
    g.add_argument("--outlier-frac", type=float, default=0.0)
    g.add_argument("--sigma-in", type=float, default=0.1)
    g.add_argument("--outlier-range", type=float, default=10.0)
    g.add_argument("--noise", type=float, default=1.0, help="pixel noise for match data")
    g.add_argument("--epsilon", type=float, default=0.3)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--truth-out", help="also write the planted inlier mask")
    g.add_argument("--out", required=True)

    f = sub.add_parser("fit", help="fit one instance or match file")
    f.add_argument("input")
    f.add_argument("--problem", choices=["auto", "instance", "homography-linear",
                                         "fundamental-linear"], default="auto")
    f.add_argument("--method", choices=bench.METHODS, default="irlp")
    f.add_argument("--epsilon", type=float, default=None)
    _ir_flags(f)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--time-budget", type=float, default=None,
                   help="run RANSAC for this many seconds (L-RANSAC)")
    f.add_argument("--oracle-limit", type=int, default=2_000_000)
    f.add_argument("--out", help="write the inlier mask (one 0/1 per point)")

    b = sub.add_parser("bench", help="seeded multi-method benchmark")
    b.add_argument("--problem", choices=bench.PROBLEMS, default="hyperplane")
    b.add_argument("--input", help="instance or match file for --problem file")
    b.add_argument("--fractions", type=_fractions, default=(0.2, 0.4, 0.6))
    b.add_argument("--n", type=int, default=250)
    b.add_argument("--d", type=int, default=8)
    b.add_argument("--epsilon", type=float, default=0.3)
    b.add_argument("--sigma-in", type=float, default=0.1)
    b.add_argument("--outlier-range", type=float, default=10.0)
    b.add_argument("--noise", type=float, default=1.0)
    b.add_argument("--method", action="append", choices=bench.METHODS,
                   help="repeat for several methods (default: ransac, l1, irlp)")
    _ir_flags(b)
    b.add_argument("--trials", type=int, default=20)
    b.add_argument("--paper-scale", action="store_true", help="100 trials per cell")
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--time-budget", type=float, default=None)
    b.add_argument("--oracle-limit", type=int, default=2_000_000)
    b.add_argument("--no-timing", action="store_true",
                   help="leave time fields empty so repeated runs are byte-identical")
    b.add_argument("--jobs", type=int, default=1)
    b.add_argument("--out", default=".", help="output directory for bench.csv/.txt/.svg")

    r = sub.add_parser("report", help="render a bench CSV")
    r.add_argument("csv")
    r.add_argument("--format", choices=["csv", "table", "svg"], default="table")
    r.add_argument("--out")
    return parser


def _read_config(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", path, lineno)
            key, value = (x.strip() for x in line.split("=", 1))
            values[key.replace("-", "_")] = (value, lineno)
    return values


def _apply_config(parser, argv, path):
    """Turn config entries into subcommand defaults so explicit flags still win."""
    pre, _ = parser.parse_known_args(argv)
    subparser = parser._subparsers._group_actions[0].choices[pre.command]
    actions = {a.dest: a for a in subparser._actions}
    defaults = {}
    for key, (value, lineno) in _read_config(path).items():
        act = actions.get(key)
        if act is None or key in ("help", "input", "csv"):
            raise UsageError(f"{path}:{lineno}: unknown key {key!r} for '{pre.command}'")
        if isinstance(act, argparse._StoreTrueAction):
            val = value.lower() in ("1", "true", "yes", "on")
        elif isinstance(act, argparse._AppendAction):
            val = [v.strip() for v in value.split(",") if v.strip()]
        else:
            try:
                val = act.type(value) if act.type else value
            except (ValueError, argparse.ArgumentTypeError):
                raise UsageError(f"{path}:{lineno}: bad value {value!r} for {key!r}") from None
        choices = act.choices
        if choices is not None and any(v not in choices for v in (val if isinstance(val, list) else [val])):
            raise UsageError(f"{path}:{lineno}: {value!r} is not one of {list(choices)}")
        defaults[key] = val
    subparser.set_defaults(**defaults)


def cmd_generate(args):
    if args.problem == "hyperplane":
        inst = synth_hyperplane(args.n, args.d, args.sigma_in, args.outlier_frac,
                                args.outlier_range, args.seed, args.epsilon)
        write_instance(args.out, inst.system, args.epsilon)
        mask = inst.ground_truth.inlier_mask
        print(f"wrote {args.out}: n={inst.system.n} d={inst.system.d} epsilon={args.epsilon}")
    else:
        matches, truth = synth_matches(args.problem, args.n, args.noise, args.outlier_frac, args.seed)
        write_matches(args.out, matches)
        mask = truth.inlier_mask
        print(f"wrote {args.out}: {len(matches)} {args.problem} matches")
    if args.truth_out:
        write_mask(args.truth_out, len(mask), np.flatnonzero(mask))
    return EXIT_OK


def _detect_problem(path):
    with open(path) as fh:
        for raw in fh:
            line = raw.split("#", 1)[0].split()
            if line:
                return "instance" if len(line) == 3 else "homography-linear"
    raise ParseError("file has no data lines", path)


def cmd_fit(args):
    problem = _detect_problem(args.input) if args.problem == "auto" else args.problem
    T1 = T2 = None
    if problem == "instance":
        inst = read_instance(args.input)
        system = inst.system
        epsilon = inst.epsilon if args.epsilon is None else args.epsilon
    else:
        if args.epsilon is None:
            raise UsageError("--epsilon is required for match files")
        norm, T1, T2 = normalize_matches(read_matches(args.input))
        system = (linearize_homography if problem == "homography-linear"
                  else linearize_fundamental)(norm)
        epsilon = args.epsilon
    spec = bench.BenchSpec(
        problem="fundamental-linear" if problem == "fundamental-linear" else "hyperplane",
        methods=(args.method,), epsilon=epsilon, gamma=args.gamma, max_iters=args.max_iters,
        zeta=args.zeta, init=args.init, time_budget=args.time_budget,
        oracle_limit=args.oracle_limit)
    res = bench.run_method(args.method, system, epsilon, spec, args.seed)

    print(f"method      {args.method}")
    print(f"points      {system.n}")
    print(f"epsilon     {epsilon:g}")
    print(f"consensus   {res.count}")
    print(f"iterations  {res.iterations}")
    print(f"stopped by  {res.terminated_by}")
    print(f"wall time   {res.wall_time:.4f} s")
    print("theta       " + " ".join(f"{v:.10g}" for v in res.theta))
    if T1 is not None and system.d == 8:
        M = theta_matrix(res.theta)
        if problem == "homography-linear":
            M = np.linalg.inv(T2) @ M @ T1
        else:
            M = T2.T @ M @ T1
        M = M / M[2, 2]
        print("model (pixel coordinates, last entry 1):")
        for row in M:
            print("  " + " ".join(f"{v:14.8g}" for v in row))
    if args.out:
        write_mask(args.out, system.n, res.inliers)
        print(f"inlier mask written to {args.out}")
    return EXIT_OK


def cmd_bench(args):
    methods = tuple(dict.fromkeys(args.method or ["ransac", "l1", "irlp"]))
    spec = bench.BenchSpec(
        problem=args.problem, fractions=args.fractions, n=args.n, d=args.d, epsilon=args.epsilon,
        methods=methods, trials=bench.FULL_TRIALS if args.paper_scale else args.trials, seed=args.seed,
        time_budget=args.time_budget, sigma_in=args.sigma_in, outlier_range=args.outlier_range,
        noise=args.noise, input_path=args.input, oracle_limit=args.oracle_limit,
        gamma=args.gamma, max_iters=args.max_iters, zeta=args.zeta, init=args.init,
        timing=not args.no_timing, jobs=args.jobs)
    report = bench.run_bench(spec)
    os.makedirs(args.out, exist_ok=True)
    bench.emit_report(report, "csv", os.path.join(args.out, "bench.csv"))
    bench.emit_report(report, "svg", os.path.join(args.out, "bench.svg"))
    print(bench.emit_report(report, "table", os.path.join(args.out, "bench.txt")), end="")
    for note in report.notes:
        print(note)
    return EXIT_OK


def cmd_report(args):
    report = bench.read_report_csv(args.csv)
    text = bench.emit_report(report, args.format, args.out)
    if not args.out:
        print(text, end="")
    return EXIT_OK


COMMANDS = {"generate": cmd_generate, "fit": cmd_fit, "bench": cmd_bench, "report": cmd_report}


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        try:
            pre, _ = parser.parse_known_args(argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else EXIT_USAGE
        if pre.config:
            _apply_config(parser, argv, pre.config)
        try:
            args = parser.parse_args(argv)
        except SystemExit as exc:
            return exc.code if isinstance(exc.code, int) else EXIT_USAGE
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"maxcon: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ParseError, DegenerateDataError, InvalidArgumentError, FileNotFoundError) as exc:
        print(f"maxcon: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SolverError, LimitExceededError) as exc:
        print(f"maxcon: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
