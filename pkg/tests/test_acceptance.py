"""Acceptance gate: eleven end-to-end criteria, one pass/fail line each.

Each test prints a single [PASS]/[FAIL] line (visible with pytest -s or -v
via the test name) and enforces both the stated tolerance and the stated
runtime budget.
"""

import time

import numpy as np
import pytest

from page_lab.analysis import fit_linear_rate
from page_lab.estimator import (
    G0_ZERO,
    PageConfig,
    expected_grad_calls_per_iter,
    init,
    make_stream,
    run,
    step,
)
from page_lab.harness.cli import main
from page_lab.harness.verify import (
    verify_contraction,
    verify_descent,
    verify_lemmas,
    verify_rollout,
)
from page_lab.lyapunov import evaluate
from page_lab.problems import ProblemSpec, generate
from page_lab.replicated import run_replicates
from page_lab.schedule import (
    RateMode,
    coefficients,
    contraction_factor,
    gamma_max_linear,
    gamma_max_sublinear,
    sublinear_bound,
)

SEED = 2024


def _finish(num, label, budget_s, start, detail):
    elapsed = time.perf_counter() - start
    if elapsed >= budget_s:
        print(f"[FAIL] criterion {num:2d} {label}: over budget "
              f"({elapsed:.1f}s >= {budget_s}s)")
        raise AssertionError(f"runtime {elapsed:.1f}s exceeds {budget_s}s")
    print(f"[PASS] criterion {num:2d} {label}: {detail} ({elapsed:.1f}s)")


def _fail(num, label, reason):
    print(f"[FAIL] criterion {num:2d} {label}: {reason}")
    raise AssertionError(f"criterion {num}: {reason}")


@pytest.fixture(scope="module")
def lemma_suite():
    return verify_lemmas(SEED, samples=10_000)


def _lemma_lines(suite, needle):
    return [ln for ln in suite.lines if needle in ln]


def test_criterion_01_component_interpolation_inequality(lemma_suite):
    num, label = 1, "interpolated cocoercivity on all families"
    start = time.perf_counter()
    lines = _lemma_lines(lemma_suite, "interpolated cocoercivity")
    if not lines or any("FAILURES" in ln for ln in lines):
        _fail(num, label, f"violations: {lines}")
    checks = len(lines) * 10_000
    if lemma_suite.elapsed >= 10.0:
        _fail(num, label, f"suite took {lemma_suite.elapsed:.1f}s")
    _finish(num, label, 10.0, start,
            f"{checks} triples across {len(lines)} families, zero failures, "
            f"suite {lemma_suite.elapsed:.1f}s")


def test_criterion_02_shifted_operator_monotonicity(lemma_suite):
    num, label = 2, "shifted-gradient monotonicity on all families"
    start = time.perf_counter()
    lines = _lemma_lines(lemma_suite, "shifted monotonicity")
    if not lines or any("FAILURES" in ln for ln in lines):
        _fail(num, label, f"violations: {lines}")
    if lemma_suite.elapsed >= 10.0:
        _fail(num, label, f"suite took {lemma_suite.elapsed:.1f}s")
    _finish(num, label, 10.0, start,
            f"{len(lines) * 10_000} pairs across {len(lines)} families, "
            f"zero failures, suite {lemma_suite.elapsed:.1f}s")


def test_criterion_03_one_step_contraction():
    num, label = 3, "exact one-step potential contraction"
    start = time.perf_counter()
    suite = verify_contraction(SEED)
    if suite.checks < 1000:
        _fail(num, label, f"only {suite.checks} states checked")
    if suite.failures:
        _fail(num, label, f"{suite.failures} violations: {suite.lines}")
    _finish(num, label, 60.0, start,
            f"{suite.checks} states, worst relative slack "
            f"{suite.worst_rel_slack:.2e}")


def test_criterion_04_one_step_descent():
    num, label = 4, "exact one-step expected descent"
    start = time.perf_counter()
    suite = verify_descent(SEED)
    if suite.checks < 1000:
        _fail(num, label, f"only {suite.checks} states checked")
    if suite.failures:
        _fail(num, label, f"{suite.failures} violations: {suite.lines}")
    _finish(num, label, 60.0, start,
            f"{suite.checks} states, worst relative slack "
            f"{suite.worst_rel_slack:.2e}")


def test_criterion_05_exact_rollout_with_monte_carlo():
    num, label = 5, "nine-step exact expectation rollout"
    start = time.perf_counter()
    suite = verify_rollout(SEED, mc_replicates=100_000)
    if suite.failures:
        _fail(num, label, f"{suite.failures} violations: {suite.lines}")
    if suite.checks != 20:
        _fail(num, label, f"expected 20 level checks, got {suite.checks}")
    _finish(num, label, 120.0, start,
            "10 levels vs geometric bound and 1e5-seed Monte Carlo "
            "within 4 SE")


def test_criterion_06_averaged_gradient_norm_bound():
    num, label = 6, "sublinear averaged gradient-norm bound"
    start = time.perf_counter()
    T, R, p = 2000, 500, 0.1
    details = []
    for spec in (
        ProblemSpec(family="interpolated_quadratic", n=32, d=10,
                    target_L=1.0, target_tau=0.5, seed=2),
        ProblemSpec(family="logistic", n=32, d=10, target_L=1.0, seed=2),
    ):
        prob = generate(spec)
        gamma = 0.9 * gamma_max_sublinear(prob.profile, p)
        co = coefficients(gamma, prob.profile, RateMode.SUBLINEAR)
        x0 = make_stream(77).normal(size=prob.d)
        cfg = PageConfig(gamma=gamma, p=p, seed=123)
        res = run_replicates(prob, x0, cfg, T, co, R,
                             record_stride=T, track_mean=True)
        if res.any_diverged:
            _fail(num, label, f"{spec.family}: replicates diverged")
        # across seeds, mean of per-trajectory averages equals the average
        # of per-iteration means
        measured = float(np.mean(res.mean_grad_norm_sq))
        bound = sublinear_bound(res.psi0, gamma, prob.profile, T)
        if measured > bound * 1.02:
            _fail(num, label,
                  f"{spec.family}: measured {measured:.3e} exceeds "
                  f"bound {bound:.3e} * 1.02")
        details.append(f"{spec.family} ratio {measured / bound:.3f}")
    _finish(num, label, 300.0, start, "; ".join(details))


def rate_instance():
    """Gradient-dominated quadratic with kappa = 50, n = 16, fully weakly
    convex components (tau = L), p = 1/n."""
    prob = generate(ProblemSpec(family="interpolated_quadratic", n=16, d=8,
                                target_L=1.0, target_tau=1.0, target_mu=0.02,
                                seed=4))
    p = 1.0 / 16.0
    gamma = 0.9 * gamma_max_linear(prob.profile, p)
    co = coefficients(gamma, prob.profile, RateMode.LINEAR)
    x0 = make_stream(9).normal(size=8) * 2.0
    return prob, p, gamma, co, x0


def test_criterion_07_linear_rate_measurement():
    num, label = 7, "measured linear rate vs theoretical factor"
    start = time.perf_counter()
    prob, p, gamma, co, x0 = rate_instance()
    rho = contraction_factor(gamma, p, co, prob.profile)
    res = run_replicates(prob, x0, PageConfig(gamma=gamma, p=p, seed=321),
                         600, co, 500)
    fitted = fit_linear_rate(res.mean_psi)
    if fitted > rho + 0.02:
        _fail(num, label, f"fitted {fitted:.6f} > theory {rho:.6f} + 0.02")
    for t in (50, 100, 200):
        ceiling = 1.1 * rho ** t * res.psi0
        if res.mean_psi[t] > ceiling:
            _fail(num, label,
                  f"mean potential at t={t} is {res.mean_psi[t]:.3e}, "
                  f"above 1.1 rho^t psi0 = {ceiling:.3e}")
    _finish(num, label, 300.0, start,
            f"fitted {fitted:.4f} <= {rho:.4f} + 0.02, checkpoints at "
            f"t in {{50, 100, 200}} under the geometric ceiling")


def test_criterion_08_weak_convexity_cost_trend():
    num, label = 8, "cost trend across the weak-convexity range"
    start = time.perf_counter()
    iters, calls = [], []
    p = 1.0 / 64.0
    for tau in (0.0, 0.25, 0.5, 1.0):
        prob = generate(ProblemSpec(family="interpolated_quadratic", n=64,
                                    d=10, target_L=1.0, target_tau=tau,
                                    target_mu=0.02, seed=6))
        gamma = 0.9 * gamma_max_linear(prob.profile, p)
        co = coefficients(gamma, prob.profile, RateMode.LINEAR)
        x0 = make_stream(11).normal(size=10)
        cfg = PageConfig(gamma=gamma, p=p, seed=55)
        psi0 = evaluate(init(prob, x0, cfg), prob, co, gamma, p).psi
        res = run_replicates(prob, x0, cfg, 20000, co, 200,
                             record_stride=200, track_mean=True,
                             target_psi=1e-8 * psi0)
        if res.iterations_to_target is None:
            _fail(num, label, f"tau={tau}: censored at the horizon")
        iters.append(res.iterations_to_target)
        calls.append(float(np.mean(res.grad_calls[-1])))
    for k in range(3):
        if iters[k + 1] < 0.9 * iters[k]:
            _fail(num, label,
                  f"iterations not nondecreasing within 10%: {iters}")
    if iters[-1] < 2.0 * iters[0] or calls[-1] < 2.0 * calls[0]:
        _fail(num, label,
              f"strongest weak convexity not 2x costlier: "
              f"iterations {iters}, calls {calls}")
    _finish(num, label, 600.0, start,
            f"iterations {iters}, mean calls "
            f"{[int(c) for c in calls]}; extremes ratio "
            f"{iters[-1] / iters[0]:.1f}x")


def test_criterion_09_zero_start_estimate_adequacy():
    num, label = 9, "zero start estimate reaches target comparably"
    start = time.perf_counter()
    prob, p, gamma, co, x0 = rate_instance()
    target = None
    iterations = {}
    for mode in ("full_gradient", "zero"):
        cfg = PageConfig(gamma=gamma, p=p, g0_mode=mode, seed=99)
        psi0 = evaluate(init(prob, x0, cfg), prob, co, gamma, p).psi
        if target is None:
            target = 1e-8 * psi0  # absolute target set by the informed start
        res = run_replicates(prob, x0, cfg, 30000, co, 200,
                             record_stride=500, track_mean=True,
                             target_psi=target)
        if res.iterations_to_target is None:
            _fail(num, label, f"{mode} start censored at the horizon")
        iterations[mode] = res.iterations_to_target
    ratio = iterations["zero"] / iterations["full_gradient"]
    if ratio > 1.5:
        _fail(num, label, f"zero start needed {ratio:.2f}x the iterations")
    _finish(num, label, 300.0, start,
            f"iterations {iterations['full_gradient']} (informed) vs "
            f"{iterations['zero']} (zero), ratio {ratio:.3f} <= 1.5")


def _trajectory(prob, cfg, x0, T):
    state = init(prob, x0, cfg)
    xs = [state.x]
    for _ in range(T):
        state = step(state, prob, cfg)
        xs.append(state.x)
    return np.stack(xs)


def test_criterion_10_gradient_descent_reductions_and_accounting():
    num, label = 10, "degenerate cases match plain gradient descent"
    start = time.perf_counter()
    T = 2000

    # p = 1: the coin always refreshes, so the path is exactly x - gamma Dx
    prob = generate(ProblemSpec(family="interpolated_quadratic", n=6, d=4,
                                target_L=2.0, target_tau=1.0, target_mu=0.1,
                                seed=3))
    gamma = 0.25 / prob.profile.L
    got = _trajectory(prob, PageConfig(gamma=gamma, p=1.0, seed=0),
                      np.ones(4), T)
    x = np.ones(4)
    want = [x]
    for _ in range(T):
        x = x - gamma * prob.full_gradient(x)
        want.append(x)
    try:
        np.testing.assert_allclose(got, np.stack(want), rtol=1e-12, atol=0.0)
    except AssertionError:
        _fail(num, label, "p = 1 trajectory deviates from gradient descent")

    # n = 1: the correction collapses, leaving gradient descent up to
    # floating-point association
    single = generate(ProblemSpec(family="interpolated_quadratic", n=1, d=4,
                                  target_L=2.0, target_tau=0.0, seed=3))
    gamma1 = 0.25 / single.profile.L
    got1 = _trajectory(single, PageConfig(gamma=gamma1, p=0.5, seed=8),
                       np.ones(4), T)
    x = np.ones(4)
    want1 = [x]
    for _ in range(T):
        x = x - gamma1 * single.full_gradient(x)
        want1.append(x)
    try:
        np.testing.assert_allclose(got1, np.stack(want1), rtol=1e-12,
                                   atol=0.0)
    except AssertionError:
        _fail(num, label, "n = 1 trajectory deviates from gradient descent")

    # call accounting over 1e5 iterations at p = 1/4, n = 8
    prob8 = generate(ProblemSpec(family="interpolated_quadratic", n=8, d=3,
                                 target_L=1.0, target_tau=0.5, target_mu=0.05,
                                 seed=5))
    p = 0.25
    iters = 100_000
    cfg = PageConfig(gamma=0.05, p=p, seed=202)
    res = run_replicates(prob8, np.ones(3), cfg, iters, None, 1,
                         record_stride=iters, track_mean=False)
    measured = (float(res.grad_calls[-1][0]) - prob8.n) / iters
    mean = expected_grad_calls_per_iter(p, prob8.n)
    var = p * prob8.n ** 2 + (1 - p) * 4 - mean ** 2
    se = np.sqrt(var / iters)
    if abs(measured - mean) > 3.0 * se:
        _fail(num, label,
              f"measured {measured:.4f} calls/iteration vs {mean} "
              f"(3 SE = {3 * se:.4f})")
    _finish(num, label, 30.0, start,
            f"both reductions within rel 1e-12 over {T} steps; "
            f"{measured:.3f} calls/iteration vs {mean} +- {3 * se:.3f}")


def test_criterion_11_byte_identical_reruns(tmp_path):
    num, label = 11, "identical configs produce identical artifacts"
    start = time.perf_counter()
    csv_path = tmp_path / "trajectory.csv"
    cfg_text = f"""
[problem]
family = "interpolated_quadratic"
n = 8
d = 4
L = 2.0
tau = 1.0
mu = 0.1
seed = 21

[algorithm]
p = 0.25
seed = 3

[run]
horizon = 60
repetitions = 4
mode = "linear"

[x0]
kind = "gaussian"
seed = 7

[output]
csv = "{csv_path}"
"""
    cfg_file = tmp_path / "exp.toml"
    cfg_file.write_text(cfg_text, encoding="utf-8")
    if main(["run", str(cfg_file)]) != 0:
        _fail(num, label, "first run did not exit 0")
    first = csv_path.read_bytes()
    if main(["run", str(cfg_file)]) != 0:
        _fail(num, label, "second run did not exit 0")
    second = csv_path.read_bytes()
    if first != second:
        _fail(num, label, "CSV bytes differ between reruns")
    _finish(num, label, 60.0, start,
            f"{len(first)} CSV bytes reproduced exactly")
