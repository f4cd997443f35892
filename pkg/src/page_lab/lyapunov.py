"""Potential evaluation and exact one-step/multi-step verification.

The potential at a state (x, g) with coefficients (a, b), stepsize gamma and
coin probability p is

    psi = (f(x) - f_star) - b gamma |grad f(x)|^2
          + (a gamma / p) |g - grad f(x)|^2 + (b gamma / p) |g|^2,

nonnegative whenever b gamma <= 1/(2L), since the |g - grad f(x)|^2 and |g|^2
terms together dominate the subtracted gradient term.

The one-step checkers take the conditional expectation exactly: heads has
probability p, each of the n tail corrections has probability (1 - p)/n, so

    E[psi' | x, g] = p psi(heads) + ((1 - p) / n) sum_i psi(tails_i).

All successor states come from the production transition (apply_update), not
from a reimplementation, so the checks exercise the code that runs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import estimator, schedule
from .core import CallMeter, FiniteSumProblem
from .estimator import PageConfig, PageState
from .schedule import LyapunovCoefficients, RateMode, ScheduleError


class EnumerationGuardError(ValueError):
    """An exact enumeration was requested beyond its size guard."""


@dataclass(frozen=True)
class LyapunovValue:
    """Potential with its four addends, in the order they are summed:
    suboptimality, subtracted gradient term, estimator error term, estimator
    norm term."""

    psi: float
    terms: tuple[float, float, float, float]


def psi_from_parts(f_gap: float, grad_fx: np.ndarray, g: np.ndarray,
                   coeffs: LyapunovCoefficients, gamma: float,
                   p: float) -> LyapunovValue:
    """Assemble the potential from already-computed pieces.

    Term order is fixed left to right so every caller, batched or scalar,
    produces the identical float."""
    a, b = coeffs.a, coeffs.b
    gn = float(np.sum(grad_fx * grad_fx))
    err = g - grad_fx
    t0 = float(f_gap)
    t1 = -b * gamma * gn
    t2 = (a * gamma / p) * float(np.sum(err * err))
    t3 = (b * gamma / p) * float(np.sum(g * g))
    psi = ((t0 + t1) + t2) + t3
    return LyapunovValue(psi=psi, terms=(t0, t1, t2, t3))


def evaluate(state: PageState, problem: FiniteSumProblem,
             coeffs: LyapunovCoefficients, gamma: float, p: float,
             meter: CallMeter | None = None) -> LyapunovValue:
    """Potential at a state; costs one value and one full gradient, charged
    to the verification meter when one is given."""
    f_star = problem.profile.require_f_star()
    gf = problem.full_gradient(state.x)
    if meter is not None:
        meter.add(problem.n)
    f_gap = problem.value(state.x) - f_star
    return psi_from_parts(f_gap, gf, state.g, coeffs, gamma, p)


def make_psi_fn(problem: FiniteSumProblem, coeffs: LyapunovCoefficients,
                gamma: float, p: float):
    """Recorder hook computing psi from quantities the trajectory recorder
    already has in hand."""

    def psi_fn(x, g, f_gap, grad_fx):
        return psi_from_parts(f_gap, grad_fx, g, coeffs, gamma, p).psi

    return psi_fn


def exact_conditional_expectation(state: PageState, problem: FiniteSumProblem,
                                  coeffs: LyapunovCoefficients, gamma: float,
                                  p: float,
                                  meter: CallMeter | None = None) -> float:
    """E[psi(next state) | state], by enumerating all n + 1 outcomes.

    Guarded at n <= 64 when p < 1; beyond that the enumeration is refused
    rather than silently sampled."""
    if p < 1.0 and problem.n > 64:
        raise EnumerationGuardError(
            f"exact conditional expectation over n={problem.n} components "
            f"refused; the guard admits n <= 64"
        )
    heads = estimator.apply_update(state, problem, gamma, 1, 0)
    ev = p * evaluate(heads, problem, coeffs, gamma, p, meter).psi
    if p < 1.0:
        w = (1.0 - p) / problem.n
        for i in range(problem.n):
            tails = estimator.apply_update(state, problem, gamma, 0, i)
            ev += w * evaluate(tails, problem, coeffs, gamma, p, meter).psi
    return ev


@dataclass(frozen=True)
class OneStepReport:
    """Outcome of an exact one-step inequality check.

    lhs is the exact conditional expectation, rhs the theoretical ceiling;
    slack = rhs - lhs, and the check passes when slack >= -tolerance with
    tolerance = 1e-12 + 1e-9 |rhs|."""

    lhs: float
    rhs: float
    psi_t: float
    slack: float
    tolerance: float
    passed: bool
    detail: str


def _report(lhs: float, rhs: float, psi_t: float, detail: str) -> OneStepReport:
    tol = 1e-12 + 1e-9 * abs(rhs)
    slack = rhs - lhs
    return OneStepReport(lhs=lhs, rhs=rhs, psi_t=psi_t, slack=slack,
                         tolerance=tol, passed=bool(slack >= -tol),
                         detail=detail)


def check_linear_contraction(state: PageState, problem: FiniteSumProblem,
                             coeffs: LyapunovCoefficients, gamma: float,
                             p: float, mu: float | None = None,
                             meter: CallMeter | None = None) -> OneStepReport:
    """Exact check of E[psi' | state] <= rho psi at one state.

    mu defaults to the problem's certified constant; passing one overrides
    it.  The stepsize must be admissible for the linear regime at this p."""
    profile = problem.profile
    if mu is not None:
        profile = replace(profile, mu=mu)
    if profile.mu is None:
        raise ScheduleError("linear contraction check requires mu")
    if coeffs.mode != RateMode.LINEAR:
        raise ScheduleError("linear contraction check requires linear coefficients")
    schedule.validate_stepsize(gamma, profile, p, RateMode.LINEAR)
    coeffs.check(gamma, profile)
    rho = schedule.contraction_factor(gamma, p, coeffs, profile)
    psi_t = evaluate(state, problem, coeffs, gamma, p, meter).psi
    lhs = exact_conditional_expectation(state, problem, coeffs, gamma, p, meter)
    return _report(lhs, rho * psi_t, psi_t,
                   detail=f"rho={rho:.17g} psi={psi_t:.17g}")


def check_sublinear_descent(state: PageState, problem: FiniteSumProblem,
                            coeffs: LyapunovCoefficients, gamma: float,
                            p: float,
                            meter: CallMeter | None = None) -> OneStepReport:
    """Exact check of E[psi' | state] <= psi - gamma (1/2 - b) |grad f(x)|^2
    at one state, the inequality whose telescoped form gives the averaged
    gradient-norm bound."""
    if coeffs.mode != RateMode.SUBLINEAR:
        raise ScheduleError("descent check requires sublinear coefficients")
    schedule.validate_stepsize(gamma, problem.profile, p, RateMode.SUBLINEAR)
    coeffs.check(gamma, problem.profile)
    gf = problem.full_gradient(state.x)
    if meter is not None:
        meter.add(problem.n)
    gnsq = float(np.sum(gf * gf))
    psi_t = evaluate(state, problem, coeffs, gamma, p, meter).psi
    lhs = exact_conditional_expectation(state, problem, coeffs, gamma, p, meter)
    rhs = psi_t - gamma * (0.5 - coeffs.b) * gnsq
    return _report(lhs, rhs, psi_t, detail=f"grad_norm_sq={gnsq:.17g}")


def exact_expectation_rollout(problem: FiniteSumProblem, x0,
                              config: PageConfig,
                              coeffs: LyapunovCoefficients, horizon: int,
                              meter: CallMeter | None = None) -> list[float]:
    """E[psi_t] for t = 0..horizon by exhausting the outcome tree.

    Each level multiplies the node count by n + 1 (heads plus n tail
    choices) unless p = 1, where the tree is a single path.  The enumeration
    is refused when the leaf count (n + 1)^horizon would exceed 1e6.  Node
    expansion drives the production transition."""
    if horizon < 0:
        raise ValueError(f"horizon must be nonnegative, got {horizon}")
    branches = 1 if config.p == 1.0 else problem.n + 1
    if branches ** horizon > 1e6:
        raise EnumerationGuardError(
            f"rollout of {branches}^{horizon} leaves refused; the guard "
            f"admits at most 1e6"
        )
    gamma, p = config.gamma, config.p
    nodes = [(estimator.init(problem, x0, config), 1.0)]
    out = []
    for level in range(horizon + 1):
        ev = 0.0
        for node_state, prob in nodes:
            ev += prob * evaluate(node_state, problem, coeffs, gamma, p, meter).psi
        out.append(ev)
        if level == horizon:
            break
        grown = []
        for node_state, prob in nodes:
            grown.append((estimator.apply_update(node_state, problem, gamma, 1, 0),
                          prob * p))
            if p < 1.0:
                w = prob * (1.0 - p) / problem.n
                for i in range(problem.n):
                    grown.append(
                        (estimator.apply_update(node_state, problem, gamma, 0, i), w)
                    )
        nodes = grown
    return out
