"""Command-line entry point.

Exit codes: 0 success, 2 configuration or input error, 3 solver failure.
"""

import argparse
import logging
import sys

from .core import norm_2to1_bruteforce, norm_inf_to_1_bruteforce
from .datasets import REMOTE_DATASETS, fetch_dataset, load_csv
from .exceptions import (
    ConvergenceError,
    DegenerateTrialError,
    RankDeficientError,
    RpcaError,
)
from .experiments import (
    METHODS,
    SyntheticConfig,
    preset_config,
    run_projection_experiment,
    run_regression_experiment,
    run_synthetic,
    write_report,
)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER = 0, 2, 3
SOLVER_ERRORS = (ConvergenceError, DegenerateTrialError, RankDeficientError)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _methods(text):
    out = tuple(m.strip() for m in text.split(",") if m.strip())
    bad = [m for m in out if m not in METHODS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown method(s) {bad}; choose from {','.join(METHODS)}")
    return out


def _columns(text):
    try:
        return tuple(int(c) for c in text.split(",") if c.strip())
    except ValueError:
        raise argparse.ArgumentTypeError("expected comma-separated column numbers") from None


def _add_experiment_args(p):
    p.add_argument("dataset", help="iris, a fetched dataset name (no2, bus) or a CSV path")
    p.add_argument("--methods", type=_methods, help="comma-separated subset of " + ",".join(METHODS))
    p.add_argument("-T", type=int, help="number of components")
    p.add_argument("-K", type=int, help="rounding trials for mdr")
    p.add_argument("--gamma", help="LLD weight: a number, model-fit or rank-control")
    p.add_argument("--lambda", dest="lam", type=float, help="N+L1 weight (default lam-scale/sqrt(n))")
    p.add_argument("--lam-scale", type=float)
    p.add_argument("--seed", type=int)
    p.add_argument("--centering", choices=("euclidean-median", "none"))
    p.add_argument("--column-scaling", choices=("madn", "none"))
    p.add_argument("--drop-columns", type=_columns, help="1-based column numbers, comma-separated")
    p.add_argument("--delimiter")
    p.add_argument("--header", action="store_true", default=None)
    p.add_argument("--na-policy", choices=("reject", "drop-row"))
    p.add_argument("--subsample-seed", type=int)
    p.add_argument("--svd-mode", choices=("full", "truncated"))
    p.add_argument("-o", "--output", help="output file (default stdout)")
    p.add_argument("--format", choices=("json", "csv"))


_CONFIG_KEYS = (
    "methods", "T", "K", "gamma", "lam", "lam_scale", "seed", "centering",
    "column_scaling", "drop_columns", "delimiter", "header", "na_policy",
    "subsample_seed", "svd_mode", "output", "format",
)


def config_from_args(args):
    overrides = {k: getattr(args, k) for k in _CONFIG_KEYS if getattr(args, k, None) is not None}
    return preset_config(args.dataset, **overrides)


def build_parser():
    parser = _Parser(prog="rpca-sdp", description="Robust principal components.")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("project", help="top component per method and projected box statistics")
    _add_experiment_args(p)
    p = sub.add_parser("regress", help="distances to T-dimensional regression surfaces")
    _add_experiment_args(p)

    p = sub.add_parser("synthetic", help="LLD recovery on row-corrupted low-rank data")
    p.add_argument("-n", type=int, default=200)
    p.add_argument("-p", type=int, default=30)
    p.add_argument("--rank", type=int, default=2)
    p.add_argument("--corrupt-fraction", type=float, default=0.1)
    p.add_argument("--corrupt-scale", type=float, default=3.0)
    p.add_argument("--gamma", type=float)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("-o", "--output")

    p = sub.add_parser("fetch-data", help="download NO2 and bus data into the cache")
    p.add_argument("names", nargs="*", default=sorted(REMOTE_DATASETS))
    p.add_argument("--root", help="cache directory (default $RPCA_SDP_DATA or ~/.cache/rpca_sdp)")
    p.add_argument("--force", action="store_true")

    p = sub.add_parser("oracle", help="brute-force operator norms of a small matrix")
    p.add_argument("input", help="CSV file holding X")
    p.add_argument("--delimiter", default=",")
    p.add_argument("--max-n", type=int, default=25)
    return parser


def _emit(text, path):
    if path in (None, "-"):
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.WARNING - 10 * min(args.verbose, 2),
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command in ("project", "regress"):
            config = config_from_args(args)
            runner = run_projection_experiment if args.command == "project" else run_regression_experiment
            report = runner(config)
            _emit(write_report(report, config.output, config.format), config.output)
            if report.failed:
                solver = [m for m in report.failed if _is_solver_error(report.results[m])]
                return EXIT_SOLVER if solver else EXIT_CONFIG
            return EXIT_OK
        if args.command == "synthetic":
            cfg = SyntheticConfig(
                n=args.n, p=args.p, rank=args.rank, corrupt_fraction=args.corrupt_fraction,
                corrupt_scale=args.corrupt_scale, seed=args.seed, gamma=args.gamma,
            )
            report = run_synthetic(cfg)
            _emit(write_report(report, args.output, "json"), args.output)
            return EXIT_OK
        if args.command == "fetch-data":
            for name in args.names:
                path = fetch_dataset(name, root=args.root, force=args.force)
                print(f"{name}: {path}")
            return EXIT_OK
        if args.command == "oracle":
            X = load_csv(args.input, delimiter=args.delimiter)
            M = X @ X.T
            out = {
                "n": X.shape[0],
                "p": X.shape[1],
                "norm_2to1": norm_2to1_bruteforce(X, max_n=args.max_n),
                "norm_inf_to_1_gram": norm_inf_to_1_bruteforce(M, max_n=args.max_n),
            }
            for k, v in out.items():
                print(f"{k}\t{v!r}")
            return EXIT_OK
    except SOLVER_ERRORS as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (RpcaError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_CONFIG


def _is_solver_error(result):
    return result["error"]["type"] in {c.__name__ for c in SOLVER_ERRORS}


if __name__ == "__main__":
    sys.exit(main())
