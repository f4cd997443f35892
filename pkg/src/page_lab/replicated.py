"""Lockstep execution of many independent trajectories.

Replicate r runs on the counter-based stream keyed by seed + r and consumes
exactly two uniforms per iteration (coin, then index), the same contract as
sequential stepping, so re-running any single replicate alone reproduces its
rows element for element.  All per-row arithmetic is elementwise with
reductions along the last axis only, which keeps the batched floats
bit-identical to the scalar path.

Uniform blocks are pregenerated as one (R, T, 2) array, about 16 R T bytes;
the intended regimes (R up to 1e5 with short horizons, or R a few hundred
with long ones) stay well under memory limits.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import FiniteSumProblem, as_vector
from .estimator import G0_FULL, G0_ZERO, PageConfig, make_stream
from .schedule import LyapunovCoefficients


@dataclass
class ReplicatedResult:
    """Recorded measurements of a lockstep run.

    Arrays are (records, R); mean_psi and mean_grad_norm_sq are per-iteration
    series over t = 0..executed_T when tracking was on, else None.
    iterations_to_target is the first t whose tracked mean crossed the
    target, None when censored at the horizon.
    """

    ts: np.ndarray
    f_gap: np.ndarray
    grad_norm_sq: np.ndarray
    g_norm_sq: np.ndarray
    psi: np.ndarray
    grad_calls: np.ndarray
    alive: np.ndarray
    mean_psi: np.ndarray | None
    mean_grad_norm_sq: np.ndarray | None
    psi0: float
    executed_T: int
    iterations_to_target: int | None
    diverged_at: dict
    verification_grad_calls: int

    @property
    def any_diverged(self) -> bool:
        return bool(self.diverged_at)


def run_replicates(problem: FiniteSumProblem, x0, config: PageConfig, T: int,
                   coeffs: LyapunovCoefficients | None, R: int, *,
                   record_stride: int = 1,
                   target_psi: float | None = None,
                   target_grad_norm_sq: float | None = None,
                   replicate_offset: int = 0,
                   track_mean: bool | None = None) -> ReplicatedResult:
    """Run R replicates for T iterations (or until a tracked mean crosses its
    target), recording every record_stride iterations plus t = 0 and the
    final t.

    target_psi and target_grad_norm_sq are absolute thresholds on the means
    over still-alive replicates.  Divergent replicates are frozen at their
    last finite state, marked in diverged_at with the failing t, and dropped
    from the means.
    """
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    if R < 1:
        raise ValueError(f"R must be at least 1, got {R}")
    if record_stride < 1:
        raise ValueError(f"record_stride must be at least 1, got {record_stride}")
    if target_psi is not None and coeffs is None:
        raise ValueError("a psi target needs Lyapunov coefficients")
    f_star = problem.profile.require_f_star()
    n, d = problem.n, problem.d
    gamma, p = config.gamma, config.p
    if track_mean is None:
        track_mean = (record_stride == 1 or target_psi is not None
                      or target_grad_norm_sq is not None)

    x0 = as_vector(x0, d, "x0")
    X = np.tile(x0, (R, 1))
    calls = np.zeros(R, dtype=np.int64)
    if config.g0_mode == G0_FULL:
        G = problem.batch_full_gradient(X)
        calls += n
    elif config.g0_mode == G0_ZERO:
        G = np.zeros((R, d))
    else:
        G = np.tile(as_vector(config.g0, d, "g0"), (R, 1))

    if coeffs is not None:
        a, b = coeffs.a, coeffs.b

    verification = 0

    def metrics(X, G):
        nonlocal verification
        vf = problem.batch_value(X)
        gf = problem.batch_full_gradient(X)
        verification += n * R
        f_gap = vf - f_star
        gn = np.sum(gf * gf, axis=-1)
        gsq = np.sum(G * G, axis=-1)
        if coeffs is None:
            psi = np.full(R, np.nan)
        else:
            # identical term order to the scalar potential evaluation
            err = G - gf
            t0 = f_gap
            t1 = -b * gamma * gn
            t2 = (a * gamma / p) * np.sum(err * err, axis=-1)
            t3 = (b * gamma / p) * gsq
            psi = ((t0 + t1) + t2) + t3
        return f_gap, gn, gsq, psi

    alive = np.ones(R, dtype=bool)
    diverged_at: dict[int, int] = {}
    rec_ts, rec_fgap, rec_gn, rec_gsq, rec_psi, rec_calls, rec_alive = \
        [], [], [], [], [], [], []
    mean_psi_series: list[float] = []
    mean_gn_series: list[float] = []
    iterations_to_target = None

    def alive_mean(v):
        return float(np.mean(v[alive])) if alive.any() else float("nan")

    def record(t, m):
        rec_ts.append(t)
        rec_fgap.append(m[0])
        rec_gn.append(m[1])
        rec_gsq.append(m[2])
        rec_psi.append(m[3])
        rec_calls.append(calls.copy())
        rec_alive.append(alive.copy())

    def hit_target(mp, mg):
        if target_psi is not None and mp <= target_psi:
            return True
        if target_grad_norm_sq is not None and mg <= target_grad_norm_sq:
            return True
        return False

    m = metrics(X, G)
    psi0 = float(m[3][0]) if coeffs is not None else float("nan")
    record(0, m)
    mean_p, mean_g = alive_mean(m[3]), alive_mean(m[1])
    if track_mean:
        mean_psi_series.append(mean_p)
        mean_gn_series.append(mean_g)
    executed = 0
    if hit_target(mean_p, mean_g):
        iterations_to_target = 0
        T = 0

    if T > 0:
        U = np.empty((R, T, 2))
        for r in range(R):
            U[r] = make_stream(config.seed + replicate_offset + r).random((T, 2))

    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        for t in range(T):
            u0 = U[:, t, 0]
            u1 = U[:, t, 1]
            heads = u0 < p
            idx = np.minimum((u1 * n).astype(np.int64), n - 1)
            X1 = X - gamma * G
            G1 = np.empty_like(G)
            if heads.any():
                G1[heads] = problem.batch_full_gradient(X1[heads])
            tl = ~heads
            if tl.any():
                G1[tl] = G[tl] + (problem.batch_component_gradient(idx[tl], X1[tl])
                                  - problem.batch_component_gradient(idx[tl], X[tl]))
            ok = (np.all(np.isfinite(X1), axis=1)
                  & np.all(np.isfinite(G1), axis=1))
            newly_dead = alive & ~ok
            if newly_dead.any():
                for r in np.nonzero(newly_dead)[0]:
                    diverged_at[int(r)] = t + 1
                alive = alive & ok
            if alive.all():
                X, G = X1, G1
                calls = calls + np.where(heads, n, 2)
            else:
                keep = alive[:, None]
                X = np.where(keep, X1, X)
                G = np.where(keep, G1, G)
                calls = calls + np.where(alive, np.where(heads, n, 2), 0)
            executed = t + 1

            at_record = (executed % record_stride == 0) or (executed == T)
            dead_stop = not alive.any()
            if track_mean or at_record or dead_stop:
                m = metrics(X, G)
                mean_p, mean_g = alive_mean(m[3]), alive_mean(m[1])
            if track_mean:
                mean_psi_series.append(mean_p)
                mean_gn_series.append(mean_g)
            stop = dead_stop or (track_mean and hit_target(mean_p, mean_g))
            if at_record or stop:
                record(executed, m)
            if stop:
                if track_mean and hit_target(mean_p, mean_g):
                    iterations_to_target = executed
                break

    return ReplicatedResult(
        ts=np.array(rec_ts, dtype=np.int64),
        f_gap=np.stack(rec_fgap),
        grad_norm_sq=np.stack(rec_gn),
        g_norm_sq=np.stack(rec_gsq),
        psi=np.stack(rec_psi),
        grad_calls=np.stack(rec_calls),
        alive=np.stack(rec_alive),
        mean_psi=np.array(mean_psi_series) if track_mean else None,
        mean_grad_norm_sq=np.array(mean_gn_series) if track_mean else None,
        psi0=psi0,
        executed_T=executed,
        iterations_to_target=iterations_to_target,
        diverged_at=diverged_at,
        verification_grad_calls=verification,
    )
