"""Command line entry point.

One subcommand per experiment (each takes a config file and a few overrides),
plus `sample` for dumping a single forest and `validate` for the built-in
self-checks.  Exit codes: 0 success, 1 usage or config problems, 2 resource
guard, 3 invariant violation.
"""

import argparse
import dataclasses
import sys

import numpy as np

from . import oracle
from .experiments import (ConfigError, ResourceLimit, parse_config,
                          run_experiment, write_csv, CSV_COLUMNS)
from .graph import BoxSpec, GraphError, WiredBox, complete_graph, cycle_graph
from .rng import stream
from .walks import loop_erase, random_walk
from .wilson import forest_to_text, sample_wired_usf, wilson_ust

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_RESOURCE = 2
EXIT_INVARIANT = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _build_parser():
    parser = _Parser(prog="usfsim",
                     description="spanning forest samplers and experiments")
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name in ("connectivity", "intersections", "indistinguishability",
                 "decorrelation"):
        p = sub.add_parser(name, help="run the %s experiment" % name)
        p.add_argument("--config", required=True, help="config file path")
        p.add_argument("--seed", type=int, help="override the config seed")
        p.add_argument("--replicas", type=int, help="override replica count")
        p.add_argument("--replica-offset", type=int,
                       help="first replica id (for split runs)")
        p.add_argument("--samples", type=int, help="override samples per replica")
        p.add_argument("--out", help="CSV output path (default from config, "
                                     "else stdout)")
        p.add_argument("--workers", type=int, default=1,
                       help="worker processes; output is identical for any value")
    p = sub.add_parser("sample", help="dump one wired-box forest sample")
    p.add_argument("--dimension", type=int, required=True)
    p.add_argument("--side", type=int, required=True)
    p.add_argument("--boundary", default="wired",
                   choices=["wired", "torus", "free"])
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--out", help="write the dump here instead of stdout")
    p = sub.add_parser("validate", help="run the built-in oracle self-checks")
    p.add_argument("--samples", type=int, default=20000,
                   help="Monte Carlo samples for the frequency checks")
    p.add_argument("--seed", type=int, default=7)
    return parser


def main(argv=None):
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print("usage error: %s" % err, file=sys.stderr)
        return EXIT_USAGE
    if args.command is None:
        parser.print_help()
        return EXIT_USAGE
    try:
        if args.command == "sample":
            return _cmd_sample(args)
        if args.command == "validate":
            return _cmd_validate(args)
        return _cmd_run(args)
    except UsageError as err:
        print("usage error: %s" % err, file=sys.stderr)
        return EXIT_USAGE
    except (ConfigError, GraphError, OSError) as err:
        print("config error: %s" % err, file=sys.stderr)
        return EXIT_USAGE
    except ResourceLimit as err:
        print("resource guard: %s" % err, file=sys.stderr)
        return EXIT_RESOURCE
    except AssertionError as err:
        print("invariant violation: %s" % err, file=sys.stderr)
        return EXIT_INVARIANT


def _cmd_run(args):
    with open(args.config) as fh:
        cfg = parse_config(fh.read(), path=args.config)
    if cfg.name != args.command:
        raise ConfigError("config describes %r but the subcommand is %r"
                          % (cfg.name, args.command))
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.replicas is not None:
        overrides["replicas"] = args.replicas
    if args.replica_offset is not None:
        overrides["replica_offset"] = args.replica_offset
    if args.samples is not None:
        overrides["samples"] = args.samples
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    records = run_experiment(cfg, workers=args.workers)
    out = args.out or cfg.out
    if out:
        write_csv(records, out)
        print("wrote %d rows to %s" % (len(records), out))
    else:
        import csv as _csv
        writer = _csv.writer(sys.stdout)
        writer.writerow(CSV_COLUMNS)
        for rec in records:
            writer.writerow(rec.as_row())
    return EXIT_OK


def _cmd_sample(args):
    spec = BoxSpec(args.dimension, args.side, args.boundary)
    rng = stream(args.seed, 0)
    if args.boundary == "wired":
        forest = sample_wired_usf(WiredBox(spec), rng)
    else:
        from .graph import make_box
        g = make_box(spec)
        forest = wilson_ust(g, 0, rng)
    text = forest_to_text(forest)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text)
        print("wrote %d vertices to %s" % (forest.n, args.out))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_validate(args):
    """Fast self-checks against the exact oracles; exit 3 on any failure."""
    failures = 0

    def check(label, ok):
        nonlocal failures
        print("%s %s" % ("ok  " if ok else "FAIL", label))
        if not ok:
            failures += 1

    tri = cycle_graph(3)
    k4 = complete_graph(4)
    check("matrix-tree count, triangle = 3",
          oracle.spanning_tree_count(tri) == 3)
    check("matrix-tree count, K4 = 16", oracle.spanning_tree_count(k4) == 16)
    check("enumeration agrees with matrix-tree on K4",
          len(oracle.enumerate_spanning_trees(k4)) == 16)
    rng = stream(args.seed, 1)
    counts = {}
    for i in range(args.samples):
        key = wilson_ust(tri, 0, stream(args.seed, 2, i)).tree_key()
        counts[key] = counts.get(key, 0) + 1
    p = oracle.uniformity_pvalue(counts, n_outcomes=3)
    check("wilson uniformity on triangle (chi-square p=%.4f)" % p, p > 1e-4)
    walk = random_walk(tri, 0, 500, rng)
    erased = loop_erase(walk)
    again = loop_erase(erased.vertices)
    check("loop erasure is idempotent",
          np.array_equal(erased.vertices, again.vertices))
    box = WiredBox(BoxSpec(2, 4, "wired"))
    forest = sample_wired_usf(box, stream(args.seed, 3))
    from .wilson import check_forest
    try:
        check_forest(forest, box.graph)
        check("wired sample passes structural validation", True)
    except AssertionError:
        check("wired sample passes structural validation", False)
    if failures:
        raise AssertionError("%d validate check(s) failed" % failures)
    print("all checks passed")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
