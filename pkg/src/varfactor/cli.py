"""
Command-line entry point.

Exit codes: 0 success, 2 unparsable input, 3 estimation failure,
4 violated precondition (rank too large, wrong spectrum, explosive model).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .errors import (ExplosiveGenerator, PreconditionViolation, RankMismatch,
                     VarFactorError)
from .estimation import (OptimizerOptions, TimeSeriesData, forecast, mle_fit, ols_fit,
                         yule_walker_fit)
from .factorization import cointegration_decompose, left_factorize, right_factorize
from .io import CsvParseError, ModelDocument, format_csv, read_csv
from .matpoly import MatrixPolynomial, classify_spectrum
from .simharness import get_case, run_benchmark, simulate_var

EXIT_PARSE, EXIT_FIT, EXIT_PRECONDITION = 2, 3, 4


class CliError(Exception):
    def __init__(self, code: int, message: str):
        super().__init__(message)
        self.code = code


def _fmt(a) -> str:
    return np.array2string(np.asarray(a), precision=4, suppress_small=True)


def _roots_line(poly: MatrixPolynomial) -> str:
    mags = classify_spectrum(poly).magnitudes
    return ", ".join(f"{x:.3f}" for x in mags)


def _emit(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _load_data(path) -> TimeSeriesData:
    try:
        table = read_csv(path)
    except OSError as exc:
        raise CliError(EXIT_PARSE, f"cannot read {path}: {exc}") from exc
    return TimeSeriesData(table.values)


def parse_coefficients(text: str) -> MatrixPolynomial:
    """``"a,b;c,d|e,f;g,h"``: matrices split by ``|``, rows by ``;``, entries by ``,``."""
    try:
        mats = [np.array([[float(x) for x in row.split(",")] for row in blk.split(";")])
                for blk in text.split("|")]
        return MatrixPolynomial(mats)
    except (ValueError, IndexError) as exc:
        raise CliError(EXIT_PARSE, f"cannot parse coefficients: {exc}") from exc


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_fit(args) -> int:
    data = _load_data(args.input)
    if not 0 <= args.rank < data.m:
        raise CliError(EXIT_PRECONDITION, f"rank {args.rank} must be below dimension {data.m}")
    meta = {"method": args.method, "seed": args.seed, "T": data.T}
    if args.method == "mle":
        fit = mle_fit(data, args.lags, args.rank,
                      OptimizerOptions(fit_mean=not args.no_mean), seed=args.seed)
        model = fit.model
        meta.update(neg_log_lik=fit.neg_log_lik, iterations=fit.iterations,
                    converged=fit.converged)
    elif args.method == "ols":
        model = ols_fit(data, args.lags, intercept=not args.no_mean)
    else:
        model = yule_walker_fit(data, args.lags, demean=not args.no_mean)
    if model.long_run is None and args.rank > 0:
        try:
            model.long_run = cointegration_decompose(model.poly, args.rank)
        except RankMismatch:
            pass
    doc = ModelDocument.from_model(model, args.rank, meta)
    lines = [f"method: {args.method}  m={data.m} k={args.lags} r={args.rank} T={data.T}",
             f"root magnitudes: {_roots_line(model.poly)}",
             f"mu: {_fmt(model.mu)}",
             f"Pi:\n{_fmt(model.poly.long_run())}"]
    if model.factor is not None:
        lines.append(f"U:\n{_fmt(model.factor.diff.U)}")
    if model.long_run is not None:
        lines.append(f"beta:\n{_fmt(model.long_run.beta)}")
    print("\n".join(lines))
    if args.out:
        doc.write(args.out)
    return 0


def cmd_factorize(args) -> int:
    if args.model:
        poly = ModelDocument.read(args.model).to_model().poly
    elif args.coeffs:
        poly = parse_coefficients(args.coeffs)
    else:
        raise CliError(EXIT_PARSE, "give --model or --coeffs")
    fn = left_factorize if args.side == "left" else right_factorize
    try:
        pair = fn(poly, args.rank)
    except RankMismatch as exc:
        raise CliError(EXIT_PRECONDITION, str(exc)) from exc
    resid = pair.residual(poly)
    for j, c in enumerate(pair.stable.coeffs, start=1):
        print(f"Upsilon_{j}:\n{_fmt(c)}")
    print(f"U:\n{_fmt(pair.diff.U)}")
    print(f"residual: {resid:.3e}")
    return 0


def cmd_simulate(args) -> int:
    if args.model:
        model = ModelDocument.read(args.model).to_model()
        source = f"model={args.model}"
    else:
        case = get_case(args.case, tau=args.tau)
        model = case.model()
        source = f"case={args.case} tau={args.tau}"
    data = simulate_var(model, args.T, args.burn_in, args.seed)
    comments = [f"varfactor simulate {source} T={args.T} seed={args.seed} "
                f"burn_in={args.burn_in}"]
    header = [f"x{i + 1}" for i in range(model.dim)]
    _emit(format_csv(data.values, header, comments), args.out)
    return 0


def cmd_bench(args) -> int:
    estimators = tuple(args.estimators.split(","))
    tables = []
    for number in args.case:
        case = get_case(number, T=args.T, M=args.M, seed=args.seed, tau=args.tau)
        table = run_benchmark(case, estimators, workers=args.workers)
        print(table.format())
        tables.append(table.as_dict())
    if args.out:
        Path(args.out).write_text(json.dumps(tables, indent=1, sort_keys=True) + "\n")
    return 0


def cmd_forecast(args) -> int:
    model = ModelDocument.read(args.model).to_model()
    data = _load_data(args.data)
    if data.m != model.dim:
        raise CliError(EXIT_PARSE, f"data has {data.m} columns, model expects {model.dim}")
    fc = forecast(model, data, args.horizon)
    header = [f"x{i + 1}" for i in range(model.dim)]
    _emit(format_csv(fc, header, [f"forecast horizon={args.horizon}"]), args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="varfactor",
                                description="VAR models with prescribed unit roots")
    sub = p.add_subparsers(dest="command", required=True)

    f = sub.add_parser("fit", help="fit a VAR to a CSV series")
    f.add_argument("input")
    f.add_argument("--lags", "-k", type=int, default=1)
    f.add_argument("--rank", "-r", type=int, default=0, help="number of unit roots")
    f.add_argument("--method", choices=("mle", "ols", "yw"), default="mle")
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--no-mean", action="store_true", help="fix the constant at zero")
    f.add_argument("--out")
    f.set_defaults(func=cmd_fit)

    fz = sub.add_parser("factorize", help="split Phi into stable and difference factors")
    fz.add_argument("--model")
    fz.add_argument("--coeffs", help="inline coefficients, e.g. '0.5,0;0,1'")
    fz.add_argument("--rank", "-r", type=int, required=True)
    fz.add_argument("--side", choices=("left", "right"), default="left")
    fz.set_defaults(func=cmd_factorize)

    s = sub.add_parser("simulate", help="simulate a benchmark case or saved model")
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--case", type=int, choices=(1, 2, 3))
    src.add_argument("--model")
    s.add_argument("--T", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--burn-in", type=int, default=500)
    s.add_argument("--tau", type=float, default=1.0)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    b = sub.add_parser("bench", help="Monte Carlo efficiency study")
    b.add_argument("--case", type=int, nargs="+", choices=(1, 2, 3), default=[1])
    b.add_argument("--T", type=int, default=200)
    b.add_argument("--M", type=int, default=200)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--tau", type=float, default=1.0)
    b.add_argument("--estimators", default="mle,ols,yw")
    b.add_argument("--workers", type=int, default=1)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)

    fc = sub.add_parser("forecast", help="iterate point forecasts from a saved model")
    fc.add_argument("--model", required=True)
    fc.add_argument("--data", required=True)
    fc.add_argument("--horizon", "-H", type=int, default=1)
    fc.add_argument("--out")
    fc.set_defaults(func=cmd_forecast)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except CsvParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (PreconditionViolation, ExplosiveGenerator) as exc:
        print(f"error: {exc}", file=sys.stderr)
        roots = getattr(exc, "roots", None)
        if roots is not None:
            print("roots: " + ", ".join(f"{z:.3f}" for z in roots), file=sys.stderr)
        return EXIT_PRECONDITION
    except json.JSONDecodeError as exc:
        print(f"error: malformed model document: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (VarFactorError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FIT


if __name__ == "__main__":
    sys.exit(main())
