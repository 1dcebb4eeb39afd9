"""Command-line interface: ``hypersmml {verify,fit,plot,suffstat}``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import svg
from .errors import HyperSmmlError
from .model_core import DesignBasis, suff_stat
from .prior_marginal import TruncatedDomain
from .serialization import code_to_dict, read_code, write_json
from .smml_estimator import fit_smml
from .verify import DEFAULT_CONFIG, run_checks

logger = logging.getLogger("hypersmml")

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def parse_domain(text: str) -> tuple[tuple[float, ...], tuple[float, ...]]:
    """``"lo1,lo2/hi1,hi2"`` -> ``((lo1, lo2), (hi1, hi2))``."""
    try:
        lo, hi = text.split("/")
        lower = tuple(float(v) for v in lo.split(","))
        upper = tuple(float(v) for v in hi.split(","))
    except ValueError as exc:
        raise UsageError(f"--domain must look like lo1,lo2/hi1,hi2, got {text!r}") from exc
    if len(lower) != len(upper):
        raise UsageError("--domain bounds have different lengths")
    return lower, upper


def read_matrix_csv(path, what: str) -> np.ndarray:
    """Numeric CSV, optionally with one non-numeric header line."""
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [row for row in csv.reader(fh) if row and any(cell.strip() for cell in row)]
    except OSError as exc:
        raise UsageError(f"cannot read {what} CSV {path}: {exc}") from exc
    if not rows:
        raise HyperSmmlError(f"{what} CSV {path} is empty")

    def numeric(row):
        try:
            [float(c) for c in row]
            return True
        except ValueError:
            return False

    start = 0 if numeric(rows[0]) else 1
    body = rows[start:]
    if not body:
        raise HyperSmmlError(f"{what} CSV {path} has a header but no data rows")
    width = len(body[0])
    values = []
    for lineno, row in enumerate(body, start=start + 1):
        if len(row) != width:
            raise HyperSmmlError(
                f"{what} CSV {path}: ragged row at line {lineno} ({len(row)} cells, expected {width})"
            )
        try:
            values.append([float(c) for c in row])
        except ValueError:
            bad = next(c for c in row if not numeric([c]))
            raise HyperSmmlError(f"{what} CSV {path}: non-numeric cell {bad!r} at line {lineno}") from None
    return np.array(values, dtype=float)


def cmd_verify(args) -> int:
    config = dict(DEFAULT_CONFIG)
    if args.config:
        try:
            config.update(json.loads(Path(args.config).read_text(encoding="utf-8")))
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"cannot read config {args.config}: {exc}") from exc
    if args.tolerance is not None:
        config["tolerance"] = args.tolerance
    try:
        report = run_checks(config)
    except (KeyError, TypeError, ValueError) as exc:
        raise UsageError(f"invalid config: {exc}") from exc
    doc = report.to_dict()
    if args.report:
        write_json(args.report, doc)
    for c in report.checks:
        delta = "-" if c.delta is None else f"{c.delta:.3e}"
        print(f"{c.status.upper():7s} {c.name:30s} n={c.n:<3d} p={c.p:<2d} delta={delta} tol={c.tolerance:.1e} {c.note}")
    print("all checks passed" if report.ok else "some checks FAILED")
    return EXIT_OK if report.ok else EXIT_FAIL


def cmd_fit(args) -> int:
    if args.domain:
        lower, upper = parse_domain(args.domain)
    else:
        p = args.p if args.p is not None else 1
        default = TruncatedDomain.default(p)
        lower, upper = default.lower, default.upper
    p = len(lower) - 1
    if args.p is not None and args.p != p:
        raise UsageError(f"--p {args.p} does not match the {len(lower)}-dimensional --domain")
    if args.m < 1 or args.n < 1 or args.restarts < 1:
        raise UsageError("--m, --n and --restarts must be positive")
    domain = TruncatedDomain(lower, upper, args.resolution)
    code = fit_smml(
        args.m, domain, args.n, p,
        restarts=args.restarts, seed=args.seed, tol=args.tol, max_iter=args.max_iter,
    )
    doc = code_to_dict(code, args.n, seed=args.seed)
    write_json(args.out, doc)
    logger.info("wrote %s (I1 = %.6f nats)", args.out, doc["I1_nats"])
    return EXIT_OK


def cmd_plot(args) -> int:
    try:
        code, n, _ = read_code(args.code)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read code file {args.code}: {exc}") from exc
    Path(args.out).write_text(svg.render(code, n, args.view), encoding="utf-8")
    return EXIT_OK


def cmd_suffstat(args) -> int:
    A = read_matrix_csv(args.design, "design")
    y = read_matrix_csv(args.response, "response")
    if y.shape[1] != 1:
        raise HyperSmmlError(f"response CSV must have one column, got {y.shape[1]}")
    if y.shape[0] != A.shape[0]:
        raise HyperSmmlError(f"design has {A.shape[0]} rows but response has {y.shape[0]}")
    basis = DesignBasis.from_design(A)
    x = suff_stat(basis, y[:, 0])
    write_json(args.out, {"n": basis.n, "p": basis.p, "B": basis.B.tolist(), "x": x.tolist()})
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hypersmml", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run the numerical self-check suite")
    p.add_argument("--config", help="JSON config (cases, seed, points, tolerances)")
    p.add_argument("--report", help="write the JSON report here")
    p.add_argument("--tolerance", type=float, help="override every tolerance")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("fit", help="fit an SMML code on a truncated domain")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--p", type=int)
    p.add_argument("--domain", help="u-coordinate box lo1,..,lo_{p+1}/hi1,..,hi_{p+1}")
    p.add_argument("--resolution", type=int, default=64)
    p.add_argument("--restarts", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-9)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("plot", help="render a fitted code as SVG (p = 1)")
    p.add_argument("code", help="JSON file written by 'fit'")
    p.add_argument("--out", required=True)
    p.add_argument("--view", choices=("affine", "hyperbolic"), default="hyperbolic")
    p.set_defaults(func=cmd_plot)

    p = sub.add_parser("suffstat", help="sufficient statistic of a design/response pair")
    p.add_argument("design")
    p.add_argument("response")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_suffstat)
    return parser


def _glue_domain(argv: list[str]) -> list[str]:
    # "--domain -2,0.5/2,4" would otherwise be parsed as an unknown option
    out = []
    it = iter(argv)
    for arg in it:
        if arg == "--domain":
            value = next(it, None)
            out.append(arg if value is None else f"--domain={value}")
        else:
            out.append(arg)
    return out


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(_glue_domain(sys.argv[1:] if argv is None else list(argv)))
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"hypersmml {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HyperSmmlError as exc:
        print(f"hypersmml {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"hypersmml {args.command}: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
