"""The page-lab command line.

Subcommands: run, sweep, verify, rate.  Exit codes: 0 success, 1 validation
or usage error, 2 runtime failure (divergence, unreadable files), 3
verification failure.
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from .. import analysis
from ..estimator import DivergenceError
from ..problems import CertificationError, GenerationError
from ..schedule import ScheduleError
from .config import ConfigError, load_experiment, load_sweep
from .runner import execute_run
from .sweep import execute_sweep
from .verify import SUITES, run_suite


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="page-lab",
                     description="seeded finite-sum optimization experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment config")
    run_p.add_argument("config", help="TOML experiment file")
    run_p.set_defaults(func=cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a sweep config")
    sweep_p.add_argument("config", help="TOML sweep file")
    sweep_p.set_defaults(func=cmd_sweep)

    verify_p = sub.add_parser("verify", help="run a verification suite")
    verify_p.add_argument("suite", help=f"one of {SUITES + ('all',)}")
    verify_p.add_argument("--seed", type=int, default=2024,
                          help="master seed for the suite (default 2024)")
    verify_p.set_defaults(func=cmd_verify)

    rate_p = sub.add_parser("rate", help="fit a decay factor to a trajectory CSV")
    rate_p.add_argument("csv", help="trajectory CSV written by page-lab run")
    rate_p.set_defaults(func=cmd_rate)
    return parser


def cmd_run(args) -> int:
    cfg = load_experiment(args.config)
    out = execute_run(cfg)
    s = out.summary
    print(f"problem: {s['problem']['family']} n={s['problem']['n']} "
          f"d={s['problem']['d']}")
    print(f"gamma={s['algorithm']['gamma']:.6g} p={s['algorithm']['p']:.6g} "
          f"mode={s['mode']} a={s['coefficients']['a']:.6g} "
          f"b={s['coefficients']['b']:.6g}")
    print(f"psi0={s['psi0']:.6g}")
    fin = s["final"]
    print(f"final t={fin['t']}: mean psi={fin['mean_psi']:.6g} "
          f"mean f gap={fin['mean_f_gap']:.6g} "
          f"mean |grad f|^2={fin['mean_grad_norm_sq']:.6g}")
    rates = s["rates"]
    if rates["theoretical_rho"] is not None:
        print(f"contraction factor: theory {rates['theoretical_rho']:.6g}"
              + (f", fitted {rates['fitted_rho']:.6g}"
                 if rates["fitted_rho"] is not None else ""))
    if rates["sublinear_grad_norm_bound"] is not None:
        print(f"averaged |grad f|^2 bound: "
              f"{rates['sublinear_grad_norm_bound']:.6g}")
    for path in out.wrote:
        print(f"wrote {path}")
    if s["diverged"]:
        print(f"DIVERGED replicates (replicate, t): {s['diverged']}",
              file=sys.stderr)
        return 2
    return 0


def cmd_sweep(args) -> int:
    cfg = load_sweep(args.config)
    result = execute_sweep(cfg)
    names = [name for name, _ in result.axes]
    for pt in result.points:
        coords = " ".join(f"{k}={v}" for k, v in zip(names, pt.values))
        if pt.status == "invalid":
            print(f"{coords}: skipped ({pt.reason})")
        elif pt.status == "censored":
            print(f"{coords}: censored at cap, mean grad calls "
                  f"{pt.mean_grad_calls:.6g}")
        else:
            extra = f" ({pt.status})" if pt.status != "ok" else ""
            print(f"{coords}: {pt.iterations} iterations, mean grad calls "
                  f"{pt.mean_grad_calls:.6g}{extra}")
    for path in result.wrote:
        print(f"wrote {path}")
    if result.all_invalid:
        print("every grid point was invalid", file=sys.stderr)
        return 1
    if result.any_diverged:
        return 2
    return 0


def cmd_verify(args) -> int:
    if args.suite == "all":
        names = list(SUITES)
    elif args.suite in SUITES:
        names = [args.suite]
    else:
        raise ConfigError(
            f"unknown suite {args.suite!r}, expected one of {SUITES + ('all',)}"
        )
    failed = False
    for name in names:
        result = run_suite(name, seed=args.seed)
        for line in result.lines:
            print(f"  {line}")
        print(result.report())
        failed = failed or not result.passed
    return 3 if failed else 0


def cmd_rate(args) -> int:
    ts_by_t: dict[int, list] = {}
    try:
        with open(args.csv, newline="", encoding="utf-8") as fh:
            reader = csv.DictReader(fh)
            if reader.fieldnames is None or "psi" not in reader.fieldnames \
                    or "t" not in reader.fieldnames:
                raise ConfigError(
                    f"{args.csv} lacks the trajectory columns 't' and 'psi'"
                )
            for row in reader:
                psi = float(row["psi"])
                if np.isfinite(psi):
                    ts_by_t.setdefault(int(row["t"]), []).append(psi)
    except OSError as e:
        print(f"page-lab: cannot read {args.csv}: {e}", file=sys.stderr)
        return 2
    if not ts_by_t:
        raise ConfigError(f"{args.csv} contains no finite potential values")
    ts = sorted(ts_by_t)
    means = [float(np.mean(ts_by_t[t])) for t in ts]
    rho = analysis.fit_linear_rate(means, ts=ts)
    print(f"fitted per-iteration decay factor: {rho:.12g} "
          f"over {len(ts)} recorded points")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as e:
        print(f"page-lab: {e}", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except (ConfigError, GenerationError, ScheduleError,
            analysis.RateFitError) as e:
        print(f"page-lab: {e}", file=sys.stderr)
        return 1
    except CertificationError as e:
        print(f"page-lab: {e}", file=sys.stderr)
        return 3
    except DivergenceError as e:
        print(f"page-lab: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"page-lab: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
