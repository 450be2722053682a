"""Command-line front end.

Each subcommand validates (alpha, theta), calls one library operation and
writes CSV or JSON.  Exit status: 0 success, 1 invalid input, 2 a verification
did not pass.  Worker threads come from the EWENS_PITMAN_WORKERS environment
variable (default: all available CPUs).
"""

import argparse
import json
import sys

from . import exactmath as em
from . import stats
from ._version import version_string
from .params import ModelParams, ParameterError
from .parallel import WORKERS_ENV
from .partition import simulate_batch
from .records import open_output, write_records_csv, write_records_jsonl

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_FAILED = 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for failed verification
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INVALID, f"{self.prog}: error: {message}\n")


def _int_list(text):
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc


def _count(text):
    return int(float(text))


def _common(p, n_default=None, trials_default=None):
    p.add_argument("--alpha", type=float, required=True, help="discount parameter, 0 <= alpha < 1")
    p.add_argument("--theta", type=float, required=True, help="strength parameter, theta > -alpha")
    p.add_argument("--n", type=_count, default=n_default, help="number of elements (accepts 1e4 style)")
    if trials_default is not None:
        p.add_argument("--trials", type=_count, default=trials_default, help="independent trajectories")
        p.add_argument("--seed", type=int, default=0, help="64-bit seed; trajectory i uses stream (seed, i)")
    p.add_argument("--out", default=None, help="output path (default stdout)")
    p.add_argument("--format", choices=("csv", "json"), default="csv")


def build_parser():
    parser = _Parser(
        prog="ewens-pitman",
        description="Exact laws, simulation and limit-theorem checks for the Ewens-Pitman partition model.",
        epilog=f"Worker threads: ${WORKERS_ENV} (default: all available CPUs).",
    )
    parser.add_argument("--version", action="version", version=version_string())
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("exact-dist", help="exact law of K_n from generalized factorial coefficients")
    _common(p)

    p = sub.add_parser("moments", help="closed-form moments of K_n or K_{r,n}")
    _common(p)
    p.add_argument("--p", type=int, default=1, help="moment order")
    p.add_argument("--r", type=int, default=None, help="block size r; omit for K_n")
    p.add_argument("--falling", action="store_true", help="falling instead of raw moment")

    p = sub.add_parser("sample", help="simulate trajectories and export checkpoint records")
    _common(p, trials_default=1)
    p.add_argument("--checkpoints", type=_int_list, default=None, help="a,b,c (default: --n)")
    p.add_argument("--r", type=_int_list, default=[1], help="tracked block sizes, e.g. 1,2")

    p = sub.add_parser("verify-clt", help="Gaussian fluctuations of K_{r,n} (--kind krn) or K_n (--kind kn)")
    _common(p, n_default=10**5, trials_default=2000)
    p.add_argument("--kind", choices=("krn", "kn"), default="krn")
    p.add_argument("--r", type=_int_list, default=[1], help="block sizes for --kind krn")

    p = sub.add_parser("verify-moments",
                       help="Monte Carlo vs exact moments of K_n and K_{r,n}, the limit S, or cross moments")
    _common(p, n_default=10**4, trials_default=10**4)
    p.add_argument("--target", choices=("moments", "shat", "cross"), default="moments")
    p.add_argument("--p", type=_int_list, default=[1, 2], help="moment orders")
    p.add_argument("--r", type=_int_list, default=[], help="block sizes")
    p.add_argument("--horizon", type=_count, default=None, help="S_hat horizon N (default: rule)")

    p = sub.add_parser("lil", help="law of the iterated logarithm diagnostic")
    _common(p, n_default=10**7, trials_default=50)

    p = sub.add_parser("estimate-alpha", help="K_{1,n}/K_n as a consistent estimator of alpha")
    _common(p, n_default=10**6, trials_default=200)

    p = sub.add_parser("oracle-check", help="log-space coefficient recursion vs exact rational oracle")
    p.add_argument("--nmax", type=int, default=em.ORACLE_MAX_N)
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    return parser


def _params(args):
    return ModelParams(args.alpha, args.theta)


def _require_n(args):
    if args.n is None or args.n < 1:
        raise UsageError("--n must be a positive integer")
    return args.n


def _emit_table(args, columns, rows, meta):
    meta = {"version": version_string(), **meta}
    with open_output(args.out) as fh:
        if args.format == "json":
            json.dump({"meta": meta, "columns": columns, "rows": rows}, fh, indent=2)
            fh.write("\n")
            return
        fh.write("# ewens_pitman " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(repr(v) if isinstance(v, float) else str(v) for v in row) + "\n")


def cmd_exact_dist(args):
    params = _params(args)
    n = _require_n(args)
    dist = em.exact_dist_Kn(params, n) if params.alpha > 0 else em.dp_dist_oracle(params, n)
    _emit_table(args, ["k", "probability"], dist.rows(), {"alpha": params.alpha, "theta": params.theta, "n": n})
    return EXIT_OK


def cmd_moments(args):
    params = _params(args)
    n = _require_n(args)
    if args.r is None:
        fn = em.falling_moment_Kn if args.falling else em.raw_moment_Kn
        value = fn(params, n, args.p)
    else:
        fn = em.falling_moment_Krn if args.falling else em.raw_moment_Krn
        value = fn(params, n, args.r, args.p)
    meta = {"alpha": params.alpha, "theta": params.theta}
    _emit_table(args, ["n", "p", "r", "kind", "value"],
                [[n, args.p, args.r if args.r else "", "falling" if args.falling else "raw", value]], meta)
    return EXIT_OK


def cmd_sample(args):
    params = _params(args)
    cps = args.checkpoints or [_require_n(args)]
    batch = simulate_batch(params, cps, args.seed, args.trials, args.r)
    records = [rec for i in range(args.trials) for rec in batch.records(i)]
    meta = {"version": version_string(), "seed": args.seed, "alpha": params.alpha, "theta": params.theta}
    if args.format == "json":
        write_records_jsonl(args.out, records, meta)
    else:
        write_records_csv(args.out, records, meta)
    return EXIT_OK


def _emit_result(args, result):
    if args.format == "json":
        result.write_json(args.out)
    else:
        result.write_csv(args.out)
    return EXIT_OK if result.passed else EXIT_FAILED


def cmd_verify_clt(args):
    params = _params(args)
    n = _require_n(args)
    kind = "clt_krn" if args.kind == "krn" else "clt_kn"
    cfg = stats.ExperimentConfig(params, args.trials, (n,), kind, tuple(args.r), args.seed)
    return _emit_result(args, stats.run_experiment(cfg))


def cmd_verify_moments(args):
    params = _params(args)
    n = _require_n(args)
    kind = {"moments": "moments", "shat": "shat_moments", "cross": "cross_moments"}[args.target]
    cfg = stats.ExperimentConfig(params, args.trials, (n,), kind, tuple(args.r), args.seed,
                                 moments=tuple(args.p), horizon=args.horizon)
    return _emit_result(args, stats.run_experiment(cfg))


def cmd_lil(args):
    params = _params(args)
    cfg = stats.ExperimentConfig(params, args.trials, (_require_n(args),), "lil", seed=args.seed)
    return _emit_result(args, stats.run_experiment(cfg))


def cmd_estimate_alpha(args):
    params = _params(args)
    cfg = stats.ExperimentConfig(params, args.trials, (_require_n(args),), "alpha_estimator", seed=args.seed)
    return _emit_result(args, stats.run_experiment(cfg))


def cmd_oracle_check(args):
    if not 1 <= args.nmax <= em.ORACLE_MAX_N:
        raise UsageError(f"--nmax must lie in [1, {em.ORACLE_MAX_N}]")
    worst, (alpha, n, k) = em.gfc_oracle_check(args.nmax)
    ok = worst <= 1e-12
    _emit_table(args, ["nmax", "max_rel_error", "worst_alpha", "worst_n", "worst_k", "passed"],
                [[args.nmax, worst, alpha, n, k, ok]], {"tolerance": 1e-12})
    return EXIT_OK if ok else EXIT_FAILED


_COMMANDS = {
    "exact-dist": cmd_exact_dist,
    "moments": cmd_moments,
    "sample": cmd_sample,
    "verify-clt": cmd_verify_clt,
    "verify-moments": cmd_verify_moments,
    "lil": cmd_lil,
    "estimate-alpha": cmd_estimate_alpha,
    "oracle-check": cmd_oracle_check,
}


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ParameterError, UsageError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
