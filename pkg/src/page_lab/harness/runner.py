"""Single-experiment execution: replicated run, CSV, summary and chart.

The trajectory CSV has the fixed header
    t,replicate,f_gap,grad_norm_sq,g_norm_sq,psi,grad_calls
with rows ordered by recorded t, then replicate.  Floats are written with
repr(), the shortest round-trip form, so identical runs give identical
bytes.  A diverged replicate contributes its rows while alive plus one row
of NaN metrics at the failing iteration, then disappears from later rows.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass

import numpy as np

from .. import analysis, schedule
from ..replicated import ReplicatedResult, run_replicates
from ..schedule import RateMode
from .config import ExperimentConfig, ResolvedExperiment, resolve
from .svg import line_chart

CSV_HEADER = "t,replicate,f_gap,grad_norm_sq,g_norm_sq,psi,grad_calls"


def _f(v) -> str:
    return repr(float(v))


def _ensure_dir(path: str) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)


def write_trajectory_csv(path: str, result: ReplicatedResult) -> None:
    _ensure_dir(path)
    rows = []
    R = result.psi.shape[1]
    for k in range(result.ts.shape[0]):
        t = int(result.ts[k])
        for r in range(R):
            if not result.alive[k, r]:
                continue
            rows.append((t, r, (
                f"{t},{r},{_f(result.f_gap[k, r])},{_f(result.grad_norm_sq[k, r])},"
                f"{_f(result.g_norm_sq[k, r])},{_f(result.psi[k, r])},"
                f"{int(result.grad_calls[k, r])}"
            )))
    for r, t_dead in result.diverged_at.items():
        rows.append((t_dead, r, f"{t_dead},{r},nan,nan,nan,nan,0"))
    rows.sort(key=lambda item: (item[0], item[1]))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for _, _, line in rows:
            fh.write(line + "\n")


@dataclass
class RunResult:
    resolved: ResolvedExperiment
    replicated: ReplicatedResult
    summary: dict
    wrote: list


def build_summary(resolved: ResolvedExperiment,
                  res: ReplicatedResult) -> dict:
    cfg = resolved.config
    problem = resolved.problem
    prof = problem.profile
    last = res.ts.shape[0] - 1
    alive_last = res.alive[last]

    def mean_last(arr):
        if not alive_last.any():
            return None
        return float(np.mean(arr[last][alive_last]))

    fitted_rho = None
    if res.mean_psi is not None:
        try:
            fitted_rho = analysis.fit_linear_rate(res.mean_psi)
        except analysis.RateFitError:
            fitted_rho = None
    theoretical_rho = None
    if cfg.mode == RateMode.LINEAR and prof.mu is not None:
        theoretical_rho = schedule.contraction_factor(
            resolved.gamma, cfg.p, resolved.coeffs, prof)
    bound = None
    if cfg.mode == RateMode.SUBLINEAR and res.executed_T >= 0:
        bound = schedule.sublinear_bound(res.psi0, resolved.gamma, prof,
                                         res.executed_T)
    mean_calls = mean_last(res.grad_calls.astype(float))
    return {
        "problem": json.loads(problem.describe()),
        "algorithm": {
            "gamma": resolved.gamma,
            "p": cfg.p,
            "g0_mode": cfg.g0_mode,
            "seed": cfg.algo_seed,
            "expected_grad_calls_per_iter":
                cfg.p * problem.n + 2.0 * (1.0 - cfg.p),
        },
        "mode": cfg.mode.value,
        "coefficients": {"a": resolved.coeffs.a, "b": resolved.coeffs.b},
        "run": {
            "horizon": cfg.horizon,
            "executed_T": res.executed_T,
            "repetitions": cfg.repetitions,
            "record_stride": resolved.record_stride,
        },
        "psi0": res.psi0,
        "final": {
            "t": int(res.ts[last]),
            "mean_psi": mean_last(res.psi),
            "mean_f_gap": mean_last(res.f_gap),
            "mean_grad_norm_sq": mean_last(res.grad_norm_sq),
            "mean_grad_calls": mean_calls,
        },
        "rates": {
            "fitted_rho": fitted_rho,
            "theoretical_rho": theoretical_rho,
            "sublinear_grad_norm_bound": bound,
        },
        "verification_grad_calls": res.verification_grad_calls,
        "iterations_to_target": res.iterations_to_target,
        "diverged": sorted([[int(r), int(t)] for r, t in res.diverged_at.items()]),
    }


def execute_run(cfg: ExperimentConfig) -> RunResult:
    """Resolve, run and write every configured output."""
    resolved = resolve(cfg)
    res = run_replicates(
        resolved.problem, resolved.x0, resolved.page_config, cfg.horizon,
        resolved.coeffs, cfg.repetitions,
        record_stride=resolved.record_stride,
    )
    summary = build_summary(resolved, res)
    wrote = []
    if cfg.csv_path:
        write_trajectory_csv(cfg.csv_path, res)
        wrote.append(cfg.csv_path)
    if cfg.summary_path:
        _ensure_dir(cfg.summary_path)
        with open(cfg.summary_path, "w", encoding="utf-8", newline="\n") as fh:
            json.dump(summary, fh, indent=2, sort_keys=True)
            fh.write("\n")
        wrote.append(cfg.summary_path)
    if cfg.svg_path:
        _ensure_dir(cfg.svg_path)
        series = []
        if res.mean_psi is not None:
            ts = list(range(res.mean_psi.shape[0]))
            series.append(("mean potential", ts, res.mean_psi.tolist()))
            series.append(("mean |grad f|^2", ts,
                           res.mean_grad_norm_sq.tolist()))
        else:
            ts = res.ts.tolist()
            series.append(("mean potential", ts,
                           np.mean(res.psi, axis=1).tolist()))
            series.append(("mean |grad f|^2", ts,
                           np.mean(res.grad_norm_sq, axis=1).tolist()))
        line_chart(series, cfg.svg_path, title="trajectory means",
                   x_label="iteration t", y_label="value", log_y=True)
        wrote.append(cfg.svg_path)
    return RunResult(resolved=resolved, replicated=res, summary=summary,
                     wrote=wrote)
