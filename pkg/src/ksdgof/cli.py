"""Command-line entry point.

Exit codes: 0 = retain (or success / check passed), 2 = reject (or check
failed), 1 = error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .baselines import ks_test_1d, mmd_bootstrap_test
from .bench import ExperimentConfig, run_benchmark, score_check
from .errors import KsdError
from .gof_tests import _jsonable, ksd_bootstrap_test, ksd_linear_test, ksd_spectral_test
from .io import load_model, load_sample

TEST_METHODS = ("ksd-bootstrap", "ksd-linear", "ksd-spectral", "ks")


def _bandwidth(text):
    if text == "median":
        return None
    try:
        h = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 'median' or a positive number, got {text!r}") from None
    if not h > 0:
        raise argparse.ArgumentTypeError(f"bandwidth must be positive, got {text!r}")
    return h


def _seed(text):
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("seed must be a nonnegative integer")
    return v


class _Parser(argparse.ArgumentParser):
    # usage errors exit with 1; 2 is reserved for "reject"
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser():
    p = _Parser(prog="ksdgof", description="Kernelized Stein discrepancy goodness-of-fit tests")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="test whether a sample fits a model")
    t.add_argument("--sample", required=True)
    t.add_argument("--model", required=True)
    t.add_argument("--method", choices=TEST_METHODS, default="ksd-bootstrap")
    t.add_argument("--alpha", type=float, default=0.05)
    t.add_argument("--bootstrap", type=int, default=1000, help="bootstrap replicates / null draws")
    t.add_argument("--bandwidth", type=_bandwidth, default=None, metavar="median|H")
    t.add_argument("--seed", type=_seed, default=0)
    t.add_argument("--format", choices=("csv", "ndjson"), default=None)
    t.add_argument("--linear-scale", choices=("mean", "pair"), default="mean")

    m = sub.add_parser("mmd-test", help="two-sample MMD test")
    m.add_argument("--sample-x", required=True)
    m.add_argument("--sample-y", required=True)
    m.add_argument("--alpha", type=float, default=0.05)
    m.add_argument("--bootstrap", type=int, default=1000)
    m.add_argument("--bandwidth", type=_bandwidth, default=None, metavar="median|H")
    m.add_argument("--seed", type=_seed, default=0)

    b = sub.add_parser("benchmark", help="run an error-rate experiment")
    b.add_argument("--config", required=True)
    b.add_argument("--out", required=True)

    s = sub.add_parser("score-check", help="finite-difference check of a model's score")
    s.add_argument("--model", required=True)
    s.add_argument("--points", type=int, default=100)
    s.add_argument("--seed", type=_seed, default=0)
    return p


def _emit(obj):
    sys.stdout.write(json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n")


def _run_test(args):
    model = load_model(args.model)
    X = load_sample(args.sample, args.format).data
    if args.method == "ksd-bootstrap":
        rep = ksd_bootstrap_test(model, args.bandwidth, X, args.alpha, args.bootstrap, args.seed)
    elif args.method == "ksd-linear":
        rep = ksd_linear_test(model, args.bandwidth, X, args.alpha, args.linear_scale)
    elif args.method == "ksd-spectral":
        rep = ksd_spectral_test(model, args.bandwidth, X, args.alpha, args.bootstrap, args.seed)
    else:
        rep = ks_test_1d(model, X, args.alpha)
    rep.metadata["invocation"] = {
        "sample": args.sample,
        "model": args.model,
        "method": args.method,
        "alpha": args.alpha,
        "bootstrap": args.bootstrap,
        "bandwidth": "median" if args.bandwidth is None else args.bandwidth,
        "seed": args.seed,
    }
    _emit(rep.to_dict())
    return 2 if rep.rejected else 0


def _run_mmd(args):
    X = load_sample(args.sample_x).data
    Y = load_sample(args.sample_y).data
    rep = mmd_bootstrap_test(args.bandwidth, X, Y, args.alpha, args.bootstrap, args.seed)
    rep.metadata["invocation"] = {
        "sample_x": args.sample_x,
        "sample_y": args.sample_y,
        "alpha": args.alpha,
        "bootstrap": args.bootstrap,
        "bandwidth": "median" if args.bandwidth is None else args.bandwidth,
        "seed": args.seed,
    }
    _emit(rep.to_dict())
    return 2 if rep.rejected else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "test":
            return _run_test(args)
        if args.command == "mmd-test":
            return _run_mmd(args)
        if args.command == "benchmark":
            rows = run_benchmark(ExperimentConfig.load(args.config), args.out)
            _emit({"out": args.out, "rows": rows})
            return 0
        result = score_check(load_model(args.model), args.points, args.seed)
        _emit(result)
        return 0 if result["passed"] else 2
    except (KsdError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
