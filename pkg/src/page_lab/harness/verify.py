"""Verification suites behind `page-lab verify`.

Each suite hammers one layer of the theory with seeded randomness and exact
arithmetic where the math is exact:

* lemmas      : the two pairwise gradient inequalities on every problem
                family, vectorized over random (component, x, y) triples.
* contraction : exact one-step E[psi'] <= rho psi on a grid of certified
                gradient-dominated instances, coin probabilities and tau
                values, at gamma = 0.9 gamma_max.
* descent     : exact one-step E[psi'] <= psi - gamma(1/2 - b)|grad f|^2 on
                the same grid plus a logistic instance.
* rollout     : exact outcome-tree E[psi_t] against the contraction bound
                and against a large Monte Carlo run.
* certify     : sampled certificates pass on honest instances and fail,
                naming the inequality, on a mis-declared one.

The acceptance tests call these functions directly, so the command line and
the test suite cannot drift apart.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .. import analysis, lyapunov, schedule
from ..core import SmoothnessProfile
from ..estimator import PageConfig, PageState, make_stream
from ..problems import (
    CertificationError,
    ProblemSpec,
    certify,
    custom_quadratic,
    half_square,
    interpolated_quadratic,
    logistic,
)
from ..replicated import run_replicates
from ..schedule import RateMode

SUITES = ("lemmas", "contraction", "descent", "rollout", "certify")


@dataclass
class SuiteResult:
    name: str
    checks: int = 0
    failures: int = 0
    worst_rel_slack: float = float("inf")
    elapsed: float = 0.0
    lines: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.checks > 0

    def note(self, line: str) -> None:
        self.lines.append(line)

    def absorb(self, slack: np.ndarray, scale: np.ndarray, label: str) -> None:
        rel = np.asarray(slack) / np.asarray(scale)
        bad = int(np.sum(rel < -1e-9))
        self.checks += int(rel.size)
        self.failures += bad
        worst = float(np.min(rel))
        self.worst_rel_slack = min(self.worst_rel_slack, worst)
        tag = "ok" if bad == 0 else f"{bad} FAILURES"
        self.note(f"{label}: {rel.size} checks, worst relative slack "
                  f"{worst:.3e}, {tag}")

    def absorb_reports(self, reports, label: str) -> None:
        # pass/fail comes from each report's own tolerance; the relative
        # slack is informational
        bad = sum(0 if r.passed else 1 for r in reports)
        rel = [r.slack / max(1.0, abs(r.rhs)) for r in reports]
        worst = float(min(rel))
        self.checks += len(reports)
        self.failures += bad
        self.worst_rel_slack = min(self.worst_rel_slack, worst)
        tag = "ok" if bad == 0 else f"{bad} FAILURES"
        self.note(f"{label}: {len(reports)} checks, worst relative slack "
                  f"{worst:.3e}, {tag}")

    def report(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return (f"suite {self.name}: {self.checks} checks, "
                f"{self.failures} failures, worst relative slack "
                f"{self.worst_rel_slack:.3e}, {self.elapsed:.1f}s [{status}]")


def _family_instances(seed: int):
    """One representative per family, plus tau extremes for the quadratic."""
    out = []
    for k, tau_frac in enumerate((0.0, 0.5, 1.0)):
        L = 2.0
        out.append((f"interpolated_quadratic tau={tau_frac}L",
                    interpolated_quadratic(ProblemSpec(
                        family="interpolated_quadratic", n=6, d=4, target_L=L,
                        target_tau=tau_frac * L, target_mu=L / 25.0,
                        seed=seed + k))))
    out.append(("logistic", logistic(ProblemSpec(
        family="logistic", n=12, d=4, target_L=1.5, seed=seed + 7))))
    out.append(("half_square", half_square()))
    rng = make_stream(seed + 11)
    C = rng.uniform(-0.6, 1.8, size=(5, 3))
    C[0, 0] = 1.8
    C = C - np.mean(C, axis=0) + np.abs(np.mean(C, axis=0))  # keep means >= 0
    out.append(("custom_quadratic", custom_quadratic(C)))
    return out


def _sample_pairs(rng, count, d):
    scale = 10.0 ** rng.uniform(-1.0, 1.0, size=(count, 1))
    X = rng.normal(size=(count, d)) * scale
    Y = rng.normal(size=(count, d)) * (10.0 ** rng.uniform(-1.0, 1.0,
                                                           size=(count, 1)))
    return X, Y


def verify_lemmas(seed: int = 2024, samples: int = 10_000) -> SuiteResult:
    """Pairwise inequalities on every family: shifted monotonicity and the
    interpolated cocoercivity bound, on component gradients."""
    start = time.perf_counter()
    out = SuiteResult(name="lemmas")
    rng = make_stream(seed)
    for label, problem in _family_instances(seed):
        L, tau = problem.profile.L, problem.profile.tau
        idx = rng.integers(0, problem.n, size=samples)
        X, Y = _sample_pairs(rng, samples, problem.d)
        Gx = problem.batch_component_gradient(idx, X)
        Gy = problem.batch_component_gradient(idx, Y)
        slack, scale = analysis.shifted_monotonicity_slacks(Gx, Gy, X, Y, L)
        out.absorb(slack, scale, f"{label} shifted monotonicity")
        slack, scale = analysis.interpolated_cocoercivity_slacks(
            Gx, Gy, X, Y, L, tau)
        out.absorb(slack, scale, f"{label} interpolated cocoercivity")
    out.elapsed = time.perf_counter() - start
    return out


def _grid_instances(seed: int):
    """Certified gradient-dominated instances for the one-step suites:
    tau in {0, L/2, L} crossed with small (n, d) and condition numbers."""
    L = 2.0
    shapes = ((2, 2, 1.5), (5, 3, 10.0), (8, 5, 50.0))
    out = []
    for ti, tau_frac in enumerate((0.0, 0.5, 1.0)):
        for si, (n, d, kappa) in enumerate(shapes):
            spec = ProblemSpec(
                family="interpolated_quadratic", n=n, d=d, target_L=L,
                target_tau=tau_frac * L, target_mu=L / kappa,
                seed=seed + 13 * ti + si)
            out.append((tau_frac, interpolated_quadratic(spec)))
    return out


def _random_states(rng, problem, count):
    """States with mixed-scale x and a g that is sometimes the true
    gradient, sometimes noisy, sometimes unrelated."""
    states = []
    for k in range(count):
        x = rng.normal(size=problem.d) * (10.0 ** rng.uniform(-1.0, 1.0))
        kind = k % 3
        if kind == 0:
            g = problem.full_gradient(x).copy()
        elif kind == 1:
            g = problem.full_gradient(x) + 0.3 * rng.normal(size=problem.d)
        else:
            g = rng.normal(size=problem.d) * (10.0 ** rng.uniform(-1.0, 1.0))
        states.append(PageState(t=0, x=x, g=np.asarray(g, dtype=np.float64),
                                grad_calls=0, rng=rng))
    return states


def verify_contraction(seed: int = 2024, states_per_problem: int = 40) -> SuiteResult:
    """Exact one-step contraction at gamma = 0.9 gamma_max on the full
    (tau, p) grid; at least 1000 random states in total."""
    start = time.perf_counter()
    out = SuiteResult(name="contraction")
    rng = make_stream(seed + 1)
    for p in (0.1, 0.5, 1.0):
        for tau_frac, problem in _grid_instances(seed):
            prof = problem.profile
            gamma = 0.9 * schedule.gamma_max_linear(prof, p)
            coeffs = schedule.coefficients(gamma, prof, RateMode.LINEAR)
            reports = [lyapunov.check_linear_contraction(
                state, problem, coeffs, gamma, p)
                for state in _random_states(rng, problem, states_per_problem)]
            out.absorb_reports(reports, f"tau={tau_frac}L p={p} n={problem.n}")
    out.elapsed = time.perf_counter() - start
    return out


def verify_descent(seed: int = 2024, states_per_problem: int = 40) -> SuiteResult:
    """Exact one-step descent inequality on the same grid, sublinear
    coefficients, plus a logistic instance at tau = 0."""
    start = time.perf_counter()
    out = SuiteResult(name="descent")
    rng = make_stream(seed + 2)
    instances = [(tau_frac, problem) for tau_frac, problem
                 in _grid_instances(seed)]
    instances.append(("logistic", logistic(ProblemSpec(
        family="logistic", n=8, d=3, target_L=2.0, seed=seed + 23))))
    for p in (0.1, 0.5, 1.0):
        for tag, problem in instances:
            prof = problem.profile
            gamma = 0.9 * schedule.gamma_max_sublinear(prof, p)
            coeffs = schedule.coefficients(gamma, prof, RateMode.SUBLINEAR)
            reports = [lyapunov.check_sublinear_descent(
                state, problem, coeffs, gamma, p)
                for state in _random_states(rng, problem, states_per_problem)]
            out.absorb_reports(reports, f"tau={tag} p={p} n={problem.n}")
    out.elapsed = time.perf_counter() - start
    return out


def verify_rollout(seed: int = 2024, mc_replicates: int = 100_000) -> SuiteResult:
    """Exact outcome-tree expectations for a small instance over 9 steps:
    bounded by rho^t psi0 and matched by Monte Carlo within 4 standard
    errors at every level."""
    start = time.perf_counter()
    out = SuiteResult(name="rollout")
    spec = ProblemSpec(family="interpolated_quadratic", n=2, d=2, target_L=1.0,
                       target_tau=0.5, target_mu=0.2, seed=seed + 3)
    problem = interpolated_quadratic(spec)
    prof = problem.profile
    p = 0.3
    horizon = 9
    gamma = 0.9 * schedule.gamma_max_linear(prof, p)
    coeffs = schedule.coefficients(gamma, prof, RateMode.LINEAR)
    rho = schedule.contraction_factor(gamma, p, coeffs, prof)
    x0 = make_stream(seed + 4).normal(size=problem.d)
    config = PageConfig(gamma=gamma, p=p, seed=seed + 5)

    exact = lyapunov.exact_expectation_rollout(problem, x0, config, coeffs,
                                               horizon)
    psi0 = exact[0]
    bound_slack = np.array([rho ** t * psi0 - exact[t]
                            for t in range(horizon + 1)])
    bound_scale = np.array([max(1.0, rho ** t * psi0)
                            for t in range(horizon + 1)])
    out.absorb(bound_slack, bound_scale, "tree vs contraction bound")

    res = run_replicates(problem, x0, config, horizon, coeffs, mc_replicates,
                         record_stride=1, track_mean=False)
    mc_mean = np.mean(res.psi, axis=1)
    mc_se = np.std(res.psi, axis=1, ddof=1) / np.sqrt(mc_replicates)
    gap = np.abs(mc_mean - np.array(exact))
    # t = 0 is deterministic: SE is 0 there, require exact agreement
    ok0 = gap[0] <= 1e-12 * max(1.0, abs(psi0))
    out.checks += 1
    if not ok0:
        out.failures += 1
    out.note(f"t=0 Monte Carlo equals exact: {'ok' if ok0 else 'FAIL'}")
    slack = 4.0 * mc_se[1:] - gap[1:]
    out.absorb(slack, np.maximum(np.abs(4.0 * mc_se[1:]), 1e-300),
               "Monte Carlo within 4 SE of tree")
    out.elapsed = time.perf_counter() - start
    return out


def verify_certify(seed: int = 2024, samples: int = 10_000) -> SuiteResult:
    """Honest instances certify cleanly; an under-declared tau is caught
    with the inequality named."""
    start = time.perf_counter()
    out = SuiteResult(name="certify")
    rng = make_stream(seed + 6)
    for label, problem in _family_instances(seed):
        report = certify(problem, samples, rng, raise_on_failure=False)
        for r in report.results:
            out.checks += r.checks
            if not r.passed:
                out.failures += r.checks
            out.note(f"{label} {r.name}: worst slack {r.worst_slack:.3e}, "
                     f"{'ok' if r.passed else 'VIOLATED'}")
            out.worst_rel_slack = min(out.worst_rel_slack, r.worst_slack)

    # a lying declaration must fail loudly: true tau is 0.8, declared 0.2
    liar = custom_quadratic([[1.0, -0.8], [1.0, 1.7]], declared_tau=0.2)
    out.checks += 1
    try:
        certify(liar, samples, make_stream(seed + 7))
    except CertificationError as e:
        msg = str(e)
        if "cocoercivity_interpolation" in msg and "witness" in msg:
            out.note("mis-declared tau rejected with named inequality: ok")
        else:
            out.failures += 1
            out.note(f"mis-declared tau rejected but message lacks detail: {msg}")
    else:
        out.failures += 1
        out.note("mis-declared tau was NOT rejected: FAIL")
    out.elapsed = time.perf_counter() - start
    return out


def run_suite(name: str, seed: int = 2024) -> SuiteResult:
    if name == "lemmas":
        return verify_lemmas(seed)
    if name == "contraction":
        return verify_contraction(seed)
    if name == "descent":
        return verify_descent(seed)
    if name == "rollout":
        return verify_rollout(seed)
    if name == "certify":
        return verify_certify(seed)
    raise ValueError(f"unknown suite {name!r}, expected one of {SUITES}")
