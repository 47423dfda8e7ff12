"""Command-line interface: ``polysample {sample,estimate,histogram,verify-jacobian}``."""

import argparse
import csv
import json
import logging
import sys
import time

import numpy as np

from .analytic_refs import REFERENCES
from .errors import AbortAfterRedraws, BudgetExceeded, InvalidEdgeLengths, PolySampleError
from .estimator import HistogramAccumulator, HistogramSpec, parse_functional, run_until_ci
from .sampler import SamplerConfig, chunk_counts, sample_batch

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_SAMPLER = 3
EXIT_BUDGET = 4
EXIT_VERIFY = 5

MAX_VERIFY_N = 6
MAX_VERIFY_D = 3
VERIFY_TOL = 1e-5

EXIT_CODES = """\
exit codes:
  0  success
  2  invalid flags or input files
  3  sampler gave up after repeated closure failures
  4  sample budget reached before the confidence target
  5  closed-form Jacobian disagrees with the finite-difference oracle
"""

log = logging.getLogger("polysample")


class UsageError(Exception):
    pass


def _read_vector(path, what):
    try:
        with open(path) as fh:
            vals = [float(t) for t in fh.read().split()]
    except OSError as exc:
        raise UsageError(f"cannot read {what} file {path!r}: {exc.strerror}") from None
    except ValueError:
        raise UsageError(f"{what} file {path!r} must hold whitespace-separated numbers") from None
    return np.array(vals)


def _config(args, quotient=None):
    if args.n < 3:
        raise UsageError("--n must be at least 3")
    if args.d < 2:
        raise UsageError("--d must be at least 2")
    r = np.ones(args.n) if args.edgelengths is None else _read_vector(args.edgelengths, "edgelengths")
    if args.rho in ("sqrt-r", "r"):
        rho = args.rho
    else:
        rho = _read_vector(args.rho, "rho")
        if rho.shape != (args.n,) or np.any(rho <= 0) or not np.all(np.isfinite(rho)):
            raise UsageError(f"rho file must hold {args.n} positive numbers")
    try:
        return SamplerConfig(n=args.n, d=args.d, r=r, rho=rho, seed=args.seed,
                             quotient=args.quotient if quotient is None else quotient)
    except InvalidEdgeLengths as exc:
        raise UsageError(f"invalid edge lengths: {exc}") from None


def _chunk_groups(config, count, threads):
    """Yield consecutive sample batches of at most ``threads`` chunks each, in chunk order."""
    sizes = chunk_counts(count, config.chunk_size)
    step = max(1, threads)
    for start in range(0, len(sizes), step):
        total = sum(sizes[start:start + step])
        yield sample_batch(config, total, threads=threads, first_chunk=start)


def _columns(n, d):
    return ([f"w{k + 1}" for k in range(d)]
            + [f"y{i + 1}_{k + 1}" for i in range(n) for k in range(d)]
            + ["weight"])


def cmd_sample(args, out):
    config = _config(args)
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    names = _columns(config.n, config.d)
    writer = csv.writer(out, lineterminator="\n") if args.format == "csv" else None
    if writer:
        writer.writerow(names)
    for batch in _chunk_groups(config, args.count, args.threads):
        rows = np.hstack([batch.w, batch.y.reshape(len(batch), -1), batch.weight[:, None]])
        for row in rows:
            vals = [float(v) for v in row]
            if writer:
                writer.writerow([repr(v) for v in vals])
            else:
                out.write(json.dumps(dict(zip(names, vals))) + "\n")
    return EXIT_OK


def _functional(args):
    try:
        return parse_functional(args.functional, args.n)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_estimate(args, out):
    config = _config(args)
    fn = _functional(args)
    if not 0 < args.confidence < 1:
        raise UsageError("--confidence must lie in (0, 1)")
    if not args.rel_radius > 0:
        raise UsageError("--rel-radius must be positive")
    if args.max_samples < 2:
        raise UsageError("--max-samples must be at least 2")
    t0 = time.perf_counter()
    code = EXIT_OK
    try:
        rep = run_until_ci(config, fn, args.confidence, args.rel_radius,
                           args.max_samples, args.threads)
    except BudgetExceeded as exc:
        print(f"polysample: {exc}", file=sys.stderr)
        rep, code = exc.report, EXIT_BUDGET
    payload = rep.as_dict()
    if args.verbose:
        payload["wall_seconds"] = time.perf_counter() - t0
    out.write(json.dumps(payload) + "\n")
    return code


def cmd_histogram(args, out):
    config = _config(args)
    fn = _functional(args)
    try:
        spec = HistogramSpec(args.lo, args.hi, args.bins)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.count < 1:
        raise UsageError("--count must be at least 1")
    acc = HistogramAccumulator(spec)
    offset = None
    for batch in _chunk_groups(config, args.count, args.threads):
        if offset is None:
            offset = float(np.max(batch.log_weight))
        acc.add(fn(batch.y, config.r), np.exp(batch.log_weight - offset))
    hist = acc.result()
    writer = csv.writer(out, lineterminator="\n")
    header = ["bin_center", "density"]
    ref = None
    if args.reference:
        header.append("reference_density")
        ref = REFERENCES[args.reference](hist.centers)
    writer.writerow(header)
    for k, c in enumerate(hist.centers):
        row = [repr(float(c)), repr(float(hist.density[k]))]
        if ref is not None:
            row.append(repr(float(ref[k])))
        writer.writerow(row)
    return EXIT_OK


def cmd_verify_jacobian(args, out):
    from . import oracle
    from .weights import jacobian_opening

    if not 3 <= args.n <= MAX_VERIFY_N:
        raise UsageError(f"--n must lie in 3..{MAX_VERIFY_N} for the dense oracle")
    if not 2 <= args.d <= MAX_VERIFY_D:
        raise UsageError(f"--d must lie in 2..{MAX_VERIFY_D} for the dense oracle")
    if args.cases < 1:
        raise UsageError("--cases must be at least 1")
    rng = np.random.default_rng(args.seed)
    n, d = args.n, args.d
    errors = []
    bad = []
    for case in range(args.cases):
        r = rng.uniform(0.5, 1.5, n)
        while np.any(r >= 0.5 * r.sum()):
            r = rng.uniform(0.5, 1.5, n)
        rho = rng.uniform(0.5, 2.0, n)
        y = oracle.random_closed_polygon(rng, n, d, r)
        w = oracle.random_ball_point(rng, d)
        closed = float(jacobian_opening(w, y, r, rho))
        numeric = oracle.numeric_jacobian_opening(w, y, r, rho)
        err = abs(closed - numeric) / abs(numeric)
        errors.append(err)
        out.write(f"case {case + 1}: closed_form={closed!r} numeric={numeric!r} "
                  f"rel_error={err!r}\n")
        if not err <= VERIFY_TOL:
            bad.append((case + 1, w, y, r, rho))
    errors = np.array(errors)
    out.write(f"max_rel_error={float(errors.max())!r} "
              f"median_rel_error={float(np.median(errors))!r}\n")
    for case, w, y, r, rho in bad:
        print(f"polysample: case {case} exceeds {VERIFY_TOL}: w={w.tolist()!r} "
              f"y={y.tolist()!r} r={r.tolist()!r} rho={rho.tolist()!r}", file=sys.stderr)
    return EXIT_VERIFY if bad else EXIT_OK


def _add_polygon_flags(p):
    p.add_argument("--n", type=int, required=True, help="number of edges")
    p.add_argument("--d", type=int, required=True, help="ambient dimension")
    lengths = p.add_mutually_exclusive_group(required=True)
    lengths.add_argument("--equilateral", action="store_true", help="all edge lengths 1")
    lengths.add_argument("--edgelengths", metavar="FILE",
                         help="file of n whitespace-separated edge lengths")
    p.add_argument("--rho", default="sqrt-r", metavar="{sqrt-r,r,FILE}",
                   help="metric weights: sqrt-r (default), r, or a file of n values")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--quotient", action="store_true",
                   help="weight for polygons modulo rotations")
    p.add_argument("--threads", type=int, default=1, help="worker threads (output is unchanged)")
    p.add_argument("--verbose", action="store_true", help="log progress and timings to stderr")


def build_parser():
    fmt = argparse.RawDescriptionHelpFormatter
    parser = argparse.ArgumentParser(
        prog="polysample", formatter_class=fmt, epilog=EXIT_CODES,
        description="Weighted random closed polygons by conformal barycenter closure.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sample", formatter_class=fmt, epilog=EXIT_CODES,
                       help="write weighted samples as CSV or JSON lines",
                       description="Columns: w1..wd, y1_1..yn_d (row-major by vertex), weight.")
    _add_polygon_flags(p)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--format", choices=("csv", "jsonl"), default="csv")
    p.set_defaults(func=cmd_sample)

    p = sub.add_parser("estimate", formatter_class=fmt, epilog=EXIT_CODES,
                       help="estimate a mean until the confidence interval is small")
    _add_polygon_flags(p)
    p.add_argument("--functional", required=True, help="gyradius or chord:i:j")
    p.add_argument("--confidence", type=float, default=0.99)
    p.add_argument("--rel-radius", type=float, default=1e-3)
    p.add_argument("--max-samples", type=int, default=10_000_000)
    p.set_defaults(func=cmd_estimate)

    p = sub.add_parser("histogram", formatter_class=fmt, epilog=EXIT_CODES,
                       help="weighted density histogram of a functional")
    _add_polygon_flags(p)
    p.add_argument("--functional", required=True, help="gyradius or chord:i:j")
    p.add_argument("--bins", type=int, default=50)
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--reference", choices=sorted(REFERENCES))
    p.set_defaults(func=cmd_histogram)

    p = sub.add_parser("verify-jacobian", formatter_class=fmt, epilog=EXIT_CODES,
                       help="compare the closed-form Jacobian with finite differences")
    p.add_argument("--n", type=int, required=True, help=f"number of edges, at most {MAX_VERIFY_N}")
    p.add_argument("--d", type=int, required=True, help=f"dimension, at most {MAX_VERIFY_D}")
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--verbose", action="store_true")
    p.set_defaults(func=cmd_verify_jacobian)
    return parser


def main(argv=None, out=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    out = sys.stdout if out is None else out
    if args.verbose:
        logging.basicConfig(level=logging.DEBUG, stream=sys.stderr,
                            format="%(asctime)s %(name)s %(message)s")
    try:
        return args.func(args, out)
    except UsageError as exc:
        print(f"polysample: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AbortAfterRedraws as exc:
        print(f"polysample: sampler aborted: {exc}", file=sys.stderr)
        return EXIT_SAMPLER
    except PolySampleError as exc:
        print(f"polysample: {exc}", file=sys.stderr)
        return EXIT_SAMPLER


if __name__ == "__main__":
    sys.exit(main())
