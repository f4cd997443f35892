"""Oracle cost of reaching a fixed potential target vs weak convexity.

Sweeps the allowed negative-curvature level tau from 0 (convex components)
to L (fully weakly convex) on a quadratic with a fixed gradient-dominance
constant, and reports iterations and mean gradient calls needed to shrink
the potential by a fixed factor.  The admissible stepsize shrinks as tau
grows, so both costs should rise.

    python3 scripts/cost_vs_curvature.py --replicates 100
"""

import argparse
import csv
import os

import numpy as np

from page_lab.estimator import PageConfig, init, make_stream
from page_lab.harness.svg import line_chart
from page_lab.lyapunov import evaluate
from page_lab.problems import ProblemSpec, generate
from page_lab.replicated import run_replicates
from page_lab.schedule import RateMode, coefficients, gamma_max_linear


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=64, help="number of components")
    ap.add_argument("--d", type=int, default=10, help="dimension")
    ap.add_argument("--kappa", type=float, default=50.0,
                    help="smoothness over gradient-dominance ratio")
    ap.add_argument("--taus", type=float, nargs="+",
                    default=[0.0, 0.25, 0.5, 1.0],
                    help="weak-convexity levels as fractions of L")
    ap.add_argument("--epsilon-rel", type=float, default=1e-8,
                    help="potential target relative to its initial value")
    ap.add_argument("--cap", type=int, default=20000,
                    help="iteration cap per run")
    ap.add_argument("--replicates", type=int, default=100)
    ap.add_argument("--seed", type=int, default=55)
    ap.add_argument("--out-dir", default="results")
    return ap.parse_args()


def main():
    args = parse_args()
    L = 1.0
    p = 1.0 / args.n
    rows = []
    print(f"{'tau':>8} {'gamma':>10} {'iterations':>11} {'mean calls':>12}")
    for tau in args.taus:
        prob = generate(ProblemSpec(
            family="interpolated_quadratic", n=args.n, d=args.d, target_L=L,
            target_tau=tau * L, target_mu=L / args.kappa, seed=6,
        ))
        gamma = 0.9 * gamma_max_linear(prob.profile, p)
        co = coefficients(gamma, prob.profile, RateMode.LINEAR)
        x0 = make_stream(11).normal(size=prob.d)
        cfg = PageConfig(gamma=gamma, p=p, seed=args.seed)
        psi0 = evaluate(init(prob, x0, cfg), prob, co, gamma, p).psi
        res = run_replicates(prob, x0, cfg, args.cap, co, args.replicates,
                             record_stride=max(1, args.cap // 200),
                             track_mean=True,
                             target_psi=args.epsilon_rel * psi0)
        iters = res.iterations_to_target
        calls = float(np.mean(res.grad_calls[-1]))
        label = "censored" if iters is None else f"{iters:>11d}"
        print(f"{tau * L:>8.3f} {gamma:>10.4f} {label:>11} {calls:>12.1f}")
        rows.append((tau * L, gamma, iters, calls))

    os.makedirs(args.out_dir, exist_ok=True)
    csv_path = os.path.join(args.out_dir, "cost_vs_curvature.csv")
    with open(csv_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["tau", "gamma", "iterations", "mean_grad_calls"])
        w.writerows(rows)
    done = [(t, c) for t, _, i, c in rows if i is not None]
    svg_path = os.path.join(args.out_dir, "cost_vs_curvature.svg")
    line_chart([("gradient calls", [t for t, _ in done], [c for _, c in done])],
               svg_path, title="oracle cost vs weak convexity",
               x_label="tau", y_label="mean gradient calls", log_y=True)
    print(f"wrote {csv_path} and {svg_path}")


if __name__ == "__main__":
    main()
