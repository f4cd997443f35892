"""Measured vs predicted contraction as the refresh probability varies.

Runs the estimator on a gradient-dominated quadratic for several coin
probabilities, fits the per-iteration decay of the mean potential, and
compares it with the theoretical contraction factor at the same stepsize.
Writes an SVG of the decay curves and prints one table row per probability.

    python3 scripts/linear_rate_experiment.py --replicates 200
"""

import argparse
import os

import numpy as np

from page_lab.analysis import fit_linear_rate
from page_lab.estimator import PageConfig, expected_grad_calls_per_iter, make_stream
from page_lab.harness.svg import line_chart
from page_lab.problems import ProblemSpec, generate
from page_lab.replicated import run_replicates
from page_lab.schedule import (
    RateMode,
    coefficients,
    contraction_factor,
    gamma_max_linear,
)


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=16, help="number of components")
    ap.add_argument("--d", type=int, default=8, help="dimension")
    ap.add_argument("--kappa", type=float, default=50.0,
                    help="smoothness over gradient-dominance ratio")
    ap.add_argument("--tau", type=float, default=1.0,
                    help="weak-convexity level as a fraction of L")
    ap.add_argument("--horizon", type=int, default=600)
    ap.add_argument("--replicates", type=int, default=200)
    ap.add_argument("--seed", type=int, default=321)
    ap.add_argument("--out-dir", default="results")
    return ap.parse_args()


def main():
    args = parse_args()
    L = 1.0
    prob = generate(ProblemSpec(
        family="interpolated_quadratic", n=args.n, d=args.d, target_L=L,
        target_tau=args.tau * L, target_mu=L / args.kappa, seed=4,
    ))
    x0 = make_stream(9).normal(size=prob.d) * 2.0
    probs = sorted({1.0 / prob.n, 4.0 / prob.n, 0.5, 1.0})

    print(f"problem: n={prob.n} d={prob.d} L={prob.profile.L} "
          f"tau={prob.profile.tau} mu={prob.profile.mu}")
    print(f"{'p':>10} {'gamma':>10} {'rho theory':>12} {'rho fitted':>12} "
          f"{'calls/iter':>11}")
    series = []
    for p in probs:
        gamma = 0.9 * gamma_max_linear(prob.profile, p)
        co = coefficients(gamma, prob.profile, RateMode.LINEAR)
        rho = contraction_factor(gamma, p, co, prob.profile)
        res = run_replicates(prob, x0, PageConfig(gamma=gamma, p=p,
                                                  seed=args.seed),
                             args.horizon, co, args.replicates)
        fitted = fit_linear_rate(res.mean_psi)
        calls = expected_grad_calls_per_iter(p, prob.n)
        print(f"{p:>10.4f} {gamma:>10.4f} {rho:>12.6f} {fitted:>12.6f} "
              f"{calls:>11.2f}")
        series.append((f"p={p:g}", np.asarray(res.ts, dtype=float),
                       res.mean_psi))

    os.makedirs(args.out_dir, exist_ok=True)
    svg_path = os.path.join(args.out_dir, "linear_rate_vs_p.svg")
    line_chart(series, svg_path, title="mean potential decay",
               x_label="iteration", y_label="mean potential", log_y=True)
    print(f"wrote {svg_path}")


if __name__ == "__main__":
    main()
