"""Command-line entry point: ``fmmsl fit | simulate | simstudy | contour``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 convergence failure,
4 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

import numpy as np

from . import io
from .em import EmConfig, FitError, NonFiniteLikelihoodError, STOP_RULES, fit
from .inference import SingularInformationError, named_standard_errors
from .mixture import density_grid, pack, param_names
from .simstudy import run_study, simulate_mixture

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_CONVERGENCE, EXIT_NUMERICAL = 0, 1, 2, 3, 4
THREADS_ENV = "FMMSL_THREADS"

log = logging.getLogger("fmmsl")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _columns(text: str) -> list[str]:
    cols = [c.strip() for c in text.split(",") if c.strip()]
    if not cols:
        raise argparse.ArgumentTypeError("empty column list")
    return cols


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fmmsl", description="Finite mixtures of multivariate skew Laplace distributions")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="fit an FM-MSL model by EM")
    p.add_argument("--data", required=True)
    p.add_argument("--columns", type=_columns, default=None, help="comma-separated column names")
    p.add_argument("--g", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=2000)
    p.add_argument("--restarts", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stop-rule", choices=STOP_RULES, default="rel-loglik")
    p.add_argument("--m-step", choices=("joint", "printed"), default="joint")
    p.add_argument("--se", action=argparse.BooleanOptionalAction, default=True)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simulate", help="draw data from a parameter file")
    p.add_argument("--params", required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)

    p = sub.add_parser("simstudy", help="run a Monte Carlo recovery study")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--workers", type=int, default=None,
                   help=f"worker processes (default ${THREADS_ENV} or 1)")

    p = sub.add_parser("contour", help="export a mixture density grid from a p=2 fit report")
    p.add_argument("--report", required=True)
    p.add_argument("--grid", type=int, default=100)
    p.add_argument("--margin", type=float, default=0.1,
                   help="expansion of the data bounding box, as a fraction of its side lengths")
    p.add_argument("--out", required=True)
    return parser


def cmd_fit(args) -> int:
    dataset = io.load_dataset(args.data, args.columns)
    p = dataset.data.shape[1]
    if dataset.n <= args.g * (p + 1):
        raise io.DataError(f"n={dataset.n} too small for g={args.g} in dimension {p}")
    try:
        config = EmConfig(g=args.g, tol=args.tol, max_iter=args.max_iter, stop_rule=args.stop_rule,
                          restarts=args.restarts, seed=args.seed, m_step=args.m_step)
    except ValueError as exc:
        print(f"fmmsl fit: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        result = fit(dataset.data, config)
    except FitError as exc:
        print(f"fmmsl fit: {exc}", file=sys.stderr)
        numerical = any(isinstance(c, NonFiniteLikelihoodError) for c in exc.causes)
        return EXIT_NUMERICAL if numerical else EXIT_CONVERGENCE
    status = EXIT_OK if result.converged else EXIT_CONVERGENCE
    se_error = None
    if args.se:
        try:
            result.se = named_standard_errors(dataset.data, result.theta, config.eps_d)
        except SingularInformationError as exc:
            se_error = str(exc)
            status = max(status, EXIT_NUMERICAL)
    io.dump_report(io.fit_report(result, dataset, config, se_error), args.out)
    print(summarize(result, dataset.columns))
    if se_error:
        print(f"standard errors unavailable: {se_error}", file=sys.stderr)
    if not result.converged:
        print(f"did not converge within {config.max_iter} iterations", file=sys.stderr)
    return status


def summarize(result, columns) -> str:
    theta = result.theta
    lines = [f"FM-MSL fit: g={theta.g}, p={theta.p}, n={result.n}, columns={','.join(columns)}",
             f"converged={result.converged} after {result.iterations} iterations (restart {result.restart})"]
    se = dict(zip(result.se["names"], result.se["values"])) if result.se else {}
    names = param_names(theta.g, theta.p)
    for name, value in zip(names, pack(theta)):
        extra = f"  (SE {se[name]:.4f})" if name in se else ""
        lines.append(f"  {name:<16s} {value: .4f}{extra}")
    lines.append(f"loglik={result.loglik:.4f}  AIC={result.aic:.4f}  BIC={result.bic:.4f}")
    return "\n".join(lines)


def cmd_simulate(args) -> int:
    if args.n < 1:
        print("fmmsl simulate: --n must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    theta = io.load_params(args.params)
    data, labels = simulate_mixture(theta, args.n, args.seed)
    header = [f"y{k + 1}" for k in range(theta.p)] + ["label"]
    io.write_delimited(args.out, header, (list(row) + [int(lab)] for row, lab in zip(data, labels)))
    print(f"wrote {args.n} rows to {args.out}")
    return EXIT_OK


def cmd_simstudy(args) -> int:
    config = io.load_study_config(args.config)
    workers = args.workers or int(os.environ.get(THREADS_ENV, "1"))
    summary = run_study(config, workers=max(workers, 1))
    io.write_delimited(args.out, ["n", "component", "parameter", "true", "mean", "distance"],
                       ([r.n, r.component, r.parameter, r.true, r.mean, r.distance] for r in summary.rows))
    for n in config.sample_sizes:
        print(f"n={n}: {summary.fitted[n]} fitted, {len(summary.failed[n])} failed")
    return EXIT_OK if all(summary.fitted.values()) else EXIT_CONVERGENCE


def cmd_contour(args) -> int:
    report = io.load_report(args.report)
    theta = io.params_from_dict(report["params"])
    if theta.p != 2:
        raise io.DataError(f"contour export needs a p=2 report, got p={theta.p}")
    if args.grid < 2 or args.margin < 0:
        print("fmmsl contour: --grid must be >= 2 and --margin >= 0", file=sys.stderr)
        return EXIT_USAGE
    lo = np.asarray(report["data"]["min"], dtype=float)
    hi = np.asarray(report["data"]["max"], dtype=float)
    pad = args.margin * (hi - lo)
    rows = density_grid(theta, lo - pad, hi + pad, args.grid)
    io.write_delimited(args.out, ["x", "y", "density"], rows)
    print(f"wrote {len(rows)} grid points to {args.out}")
    return EXIT_OK


COMMANDS = {"fit": cmd_fit, "simulate": cmd_simulate, "simstudy": cmd_simstudy, "contour": cmd_contour}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except io.DataError as exc:
        print(f"fmmsl {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except FloatingPointError as exc:
        print(f"fmmsl {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
