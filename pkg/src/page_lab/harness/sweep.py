"""Grid sweeps: run every point of a cartesian grid to a target accuracy and
tabulate measured effort against the schedule's predictions.

Points run in parallel worker threads (capped by PAGE_LAB_THREADS); each
point's computation is single-threaded and seeded, and rows are emitted in
grid order, so the output does not depend on scheduling.
"""

from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace as dc_replace

import numpy as np

from .. import lyapunov, schedule
from ..estimator import init as estimator_init
from ..replicated import run_replicates
from ..schedule import RateMode
from .config import ConfigError, ExperimentConfig, SweepConfig, resolve
from .svg import line_chart


def worker_count() -> int:
    raw = os.environ.get("PAGE_LAB_THREADS")
    if raw is None:
        return max(1, os.cpu_count() or 1)
    try:
        k = int(raw)
    except ValueError:
        raise ConfigError(
            f"PAGE_LAB_THREADS must be a positive integer, got {raw!r}"
        ) from None
    if k < 1:
        raise ConfigError(f"PAGE_LAB_THREADS must be positive, got {k}")
    return k


def _apply_point(base: ExperimentConfig, names, values) -> ExperimentConfig:
    cfg = base
    spec = cfg.problem
    for name, v in zip(names, values):
        if name == "tau":
            spec = dc_replace(spec, target_tau=float(v))
        elif name == "n":
            spec = dc_replace(spec, n=int(v))
        elif name == "kappa":
            if float(v) <= 1.0:
                raise ConfigError(f"kappa must exceed 1, got {v}")
            spec = dc_replace(spec, target_mu=spec.target_L / float(v))
        elif name == "p":
            cfg = dc_replace(cfg, p=float(v))
        elif name == "gamma":
            cfg = dc_replace(cfg, stepsize=float(v))
        elif name == "seed":
            cfg = dc_replace(cfg, algo_seed=int(v))
        else:
            raise ConfigError(f"unknown sweep axis {name!r}")
    return dc_replace(cfg, problem=spec)


@dataclass
class SweepPoint:
    values: tuple
    status: str            # ok | censored | diverged | invalid
    iterations: int | None
    mean_grad_calls: float | None
    psi0: float | None
    rho_theory: float | None
    predicted_iteration_factor: float | None
    predicted_gradient_factor: float | None
    reason: str


@dataclass
class SweepResult:
    axes: tuple
    points: list
    wrote: list

    @property
    def all_invalid(self) -> bool:
        return all(p.status == "invalid" for p in self.points)

    @property
    def any_diverged(self) -> bool:
        return any(p.status == "diverged" for p in self.points)


def _run_point(sweep: SweepConfig, names, values) -> SweepPoint:
    try:
        cfg = _apply_point(sweep.base, names, values)
        resolved = resolve(cfg)
    except ConfigError as e:
        return SweepPoint(values=values, status="invalid", iterations=None,
                          mean_grad_calls=None, psi0=None, rho_theory=None,
                          predicted_iteration_factor=None,
                          predicted_gradient_factor=None, reason=str(e))
    problem, prof = resolved.problem, resolved.problem.profile

    state0 = estimator_init(problem, resolved.x0, resolved.page_config)
    psi0 = lyapunov.evaluate(state0, problem, resolved.coeffs,
                             resolved.gamma, cfg.p).psi
    target_psi = None
    target_gn = None
    if sweep.target == "psi":
        target_psi = sweep.epsilon_rel * psi0
    else:
        target_gn = sweep.epsilon_abs

    res = run_replicates(
        problem, resolved.x0, resolved.page_config, sweep.cap,
        resolved.coeffs, cfg.repetitions,
        record_stride=max(1, sweep.cap // 200),
        target_psi=target_psi, target_grad_norm_sq=target_gn,
        track_mean=True,
    )

    rho = None
    it_factor = None
    gd_factor = None
    if prof.mu is not None:
        rho = schedule.contraction_factor(resolved.gamma, cfg.p,
                                          resolved.coeffs, prof) \
            if resolved.coeffs.mode == RateMode.LINEAR else None
        it_factor = schedule.iteration_complexity_linear(prof, cfg.p, cfg.eta)
        gd_factor = schedule.gradient_complexity_linear(prof, cfg.p,
                                                        problem.n, cfg.eta)
    last = res.ts.shape[0] - 1
    alive_last = res.alive[last]
    mean_calls = (float(np.mean(res.grad_calls[last][alive_last]))
                  if alive_last.any() else None)
    if res.any_diverged:
        status = "diverged"
    elif res.iterations_to_target is None:
        status = "censored"
    else:
        status = "ok"
    return SweepPoint(
        values=values, status=status,
        iterations=res.iterations_to_target,
        mean_grad_calls=mean_calls, psi0=psi0, rho_theory=rho,
        predicted_iteration_factor=it_factor,
        predicted_gradient_factor=gd_factor,
        reason="" if status != "censored" else f"cap {sweep.cap} reached",
    )


def _fmt_cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return repr(float(v))


def write_sweep_csv(path: str, result: SweepResult) -> None:
    parent = os.path.dirname(os.path.abspath(path))
    os.makedirs(parent, exist_ok=True)
    names = [name for name, _ in result.axes]
    header = names + ["status", "iterations", "mean_grad_calls", "psi0",
                      "rho_theory", "predicted_iteration_factor",
                      "predicted_gradient_factor", "reason"]
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for pt in result.points:
            cells = [_fmt_cell(v) for v in pt.values]
            cells += [pt.status, _fmt_cell(pt.iterations),
                      _fmt_cell(pt.mean_grad_calls), _fmt_cell(pt.psi0),
                      _fmt_cell(pt.rho_theory),
                      _fmt_cell(pt.predicted_iteration_factor),
                      _fmt_cell(pt.predicted_gradient_factor), pt.reason]
            fh.write(",".join(cells) + "\n")


def _sweep_chart(path: str, result: SweepResult) -> None:
    numeric_axes = [k for k, (name, vals) in enumerate(result.axes)
                    if len(vals) > 1]
    if len(numeric_axes) != 1:
        return
    k = numeric_axes[0]
    name = result.axes[k][0]
    xs, measured, predicted = [], [], []
    for pt in result.points:
        if pt.status != "ok" or pt.iterations is None:
            continue
        xs.append(float(pt.values[k]))
        measured.append(float(pt.iterations))
        predicted.append(pt.predicted_iteration_factor)
    series = [("measured iterations", xs, measured)]
    if all(v is not None for v in predicted) and predicted and measured:
        scale = measured[0] / predicted[0] if predicted[0] else 1.0
        series.append(("predicted factor (scaled)", xs,
                       [v * scale for v in predicted]))
    positive_x = all(x > 0 for x in xs)
    line_chart(series, path, title=f"iterations to target vs {name}",
               x_label=name, y_label="iterations",
               log_x=positive_x, log_y=True)


def execute_sweep(sweep: SweepConfig) -> SweepResult:
    """Run the whole grid and write the configured outputs in grid order."""
    names = [name for name, _ in sweep.axes]
    grid = list(itertools.product(*(vals for _, vals in sweep.axes)))
    workers = min(worker_count(), len(grid))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            points = list(pool.map(
                lambda values: _run_point(sweep, names, values), grid))
    else:
        points = [_run_point(sweep, names, values) for values in grid]
    result = SweepResult(axes=sweep.axes, points=points, wrote=[])
    if sweep.csv_path:
        write_sweep_csv(sweep.csv_path, result)
        result.wrote.append(sweep.csv_path)
    if sweep.svg_path:
        parent = os.path.dirname(os.path.abspath(sweep.svg_path))
        os.makedirs(parent, exist_ok=True)
        _sweep_chart(sweep.svg_path, result)
        if os.path.exists(sweep.svg_path):
            result.wrote.append(sweep.svg_path)
    return result
