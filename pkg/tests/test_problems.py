"""Generated families: exact constants, zero-mean offsets, lower-bound
safety, and certification honesty (including that liars are caught)."""

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from page_lab.analysis import finite_difference_gradient
from page_lab.estimator import make_stream
from page_lab.problems import (
    CertificationError,
    GenerationError,
    ProblemSpec,
    certify,
    custom_quadratic,
    generate,
    half_square,
    interpolated_quadratic,
    logistic,
)

taus = st.sampled_from([0.0, 0.3, 1.0, 2.0])
seeds = st.integers(min_value=0, max_value=50)


def test_quadratic_hits_declared_constants_exactly():
    spec = ProblemSpec(family="interpolated_quadratic", n=6, d=5,
                       target_L=2.0, target_tau=1.0, target_mu=0.08, seed=12)
    prob = interpolated_quadratic(spec)
    curv = prob.D + prob.E
    assert float(np.max(curv)) == 2.0
    assert float(np.min(curv)) >= -1.0 - 1e-15
    assert float(np.min(prob.D)) == 0.08
    assert float(np.max(prob.D)) == pytest.approx(1.0)  # L - tau
    assert prob.profile.f_star == 0.0


@given(taus, seeds)
def test_quadratic_offsets_have_exact_zero_mean(tau, seed):
    spec = ProblemSpec(family="interpolated_quadratic", n=7, d=3,
                       target_L=2.0, target_tau=tau, seed=seed)
    prob = interpolated_quadratic(spec)
    col_means = np.mean(prob.E, axis=0)
    assert np.all(col_means == 0.0)
    # so the closed-form full gradient really is D x
    x = make_stream(seed).normal(size=3)
    np.testing.assert_array_equal(prob.full_gradient(x), prob.D * x)


def test_quadratic_component_spectra_within_weak_convexity_band():
    for tau in (0.0, 0.5, 1.9, 2.0):
        spec = ProblemSpec(family="interpolated_quadratic", n=8, d=4,
                           target_L=2.0, target_tau=tau, seed=4)
        prob = interpolated_quadratic(spec)
        curv = prob.D + prob.E
        assert float(np.max(curv)) == pytest.approx(2.0, rel=1e-15)
        assert np.all(curv >= -tau - 1e-12)
        assert np.all(curv <= 2.0 + 1e-12)


def test_quadratic_infeasible_targets_rejected():
    with pytest.raises(GenerationError):
        interpolated_quadratic(ProblemSpec(
            family="interpolated_quadratic", n=1, d=2, target_L=1.0,
            target_tau=0.5, seed=0))
    with pytest.raises(GenerationError):
        interpolated_quadratic(ProblemSpec(
            family="interpolated_quadratic", n=4, d=2, target_L=1.0,
            target_tau=2.0, seed=0))
    with pytest.raises(GenerationError):
        interpolated_quadratic(ProblemSpec(
            family="interpolated_quadratic", n=4, d=2, target_L=1.0,
            target_tau=0.0, target_mu=1.5, seed=0))


def test_generation_is_deterministic_in_seed():
    spec = ProblemSpec(family="interpolated_quadratic", n=5, d=4,
                       target_L=1.0, target_tau=0.4, seed=33)
    a, b = interpolated_quadratic(spec), interpolated_quadratic(spec)
    np.testing.assert_array_equal(a.D, b.D)
    np.testing.assert_array_equal(a.E, b.E)
    other = interpolated_quadratic(
        ProblemSpec(family="interpolated_quadratic", n=5, d=4, target_L=1.0,
                    target_tau=0.4, seed=34))
    assert not np.array_equal(a.E, other.E)


def test_logistic_smoothness_is_certified_from_data():
    spec = ProblemSpec(family="logistic", n=9, d=4, target_L=1.25, seed=7)
    prob = logistic(spec)
    row_sq = np.sum(prob.A * prob.A, axis=1)
    assert prob.profile.L == pytest.approx(float(np.max(row_sq)) / 4.0,
                                           rel=1e-15)
    assert prob.profile.L == pytest.approx(1.25, rel=1e-12)
    assert prob.profile.tau == 0.0
    assert set(np.unique(prob.y)) <= {-1.0, 1.0}


def test_logistic_gradient_matches_finite_differences():
    prob = logistic(ProblemSpec(family="logistic", n=8, d=3, target_L=1.0,
                                seed=11))
    rng = make_stream(5)
    for _ in range(4):
        x = rng.normal(size=3) * 2.0
        fd = finite_difference_gradient(prob.value, x)
        np.testing.assert_allclose(prob.full_gradient(x), fd,
                                   rtol=1e-6, atol=1e-8)


def test_logistic_reference_point_is_stationary():
    prob = logistic(ProblemSpec(family="logistic", n=12, d=4, target_L=1.5,
                                seed=3))
    if prob.has_minimizer:
        g = prob.full_gradient(prob.reference_point)
        assert float(np.sqrt(np.sum(g * g))) <= 1e-11
        assert prob.value(prob.reference_point) == pytest.approx(
            prob.profile.f_star, rel=1e-12, abs=1e-15)
    else:
        assert prob.profile.f_star == 0.0
        assert prob.reference_point is None


def test_logistic_rejects_nonconvex_targets():
    with pytest.raises(GenerationError):
        logistic(ProblemSpec(family="logistic", n=4, d=2, target_L=1.0,
                             target_tau=0.5, seed=0))
    with pytest.raises(GenerationError):
        logistic(ProblemSpec(family="logistic", n=4, d=2, target_L=1.0,
                             target_mu=0.1, seed=0))


@given(seeds)
def test_f_star_is_a_true_lower_bound(seed):
    for spec in (
        ProblemSpec(family="interpolated_quadratic", n=4, d=3, target_L=2.0,
                    target_tau=1.0, seed=seed),
        ProblemSpec(family="logistic", n=6, d=3, target_L=1.0, seed=seed),
    ):
        prob = generate(spec)
        f_star = prob.profile.f_star
        rng = make_stream(seed + 1000)
        X = rng.normal(size=(50, prob.d)) * 10.0 ** rng.uniform(
            -1, 1, size=(50, 1))
        vals = prob.batch_value(X)
        assert np.all(vals >= f_star - 1e-12)


def test_half_square_dominance_holds_with_equality():
    prob = half_square()
    assert prob.profile.mu == 1.0
    rng = make_stream(2)
    for _ in range(20):
        x = rng.normal(size=2) * 3.0
        g = prob.full_gradient(x)
        lhs = float(np.sum(g * g))
        rhs = 2.0 * prob.profile.mu * (prob.value(x) - prob.profile.f_star)
        assert lhs == pytest.approx(rhs, rel=1e-12)
    # flat in the second coordinate: not strongly convex
    assert prob.value(np.array([0.0, 7.0])) == 0.0


def test_custom_quadratic_derives_constants_from_spectrum():
    prob = custom_quadratic([[1.0, -0.5], [0.2, 1.3]])
    assert prob.profile.L == 1.3
    assert prob.profile.tau == 0.5
    assert prob.profile.mu == pytest.approx(0.4)  # min positive mean curvature
    np.testing.assert_allclose(prob.D, [0.6, 0.4])
    # recentering user-supplied floats is exact only to roundoff here,
    # unlike the paired construction in interpolated_quadratic
    assert np.all(np.abs(np.mean(prob.E, axis=0)) < 1e-15)


def test_custom_quadratic_rejects_unbounded_mean():
    with pytest.raises(GenerationError, match="unbounded"):
        custom_quadratic([[1.0, -2.0], [1.0, 1.0]])


def test_certify_passes_honest_families():
    probs = [
        generate(ProblemSpec(family="interpolated_quadratic", n=6, d=4,
                             target_L=2.0, target_tau=2.0, target_mu=0.1,
                             seed=8)),
        generate(ProblemSpec(family="logistic", n=8, d=3, target_L=1.0,
                             seed=8)),
        half_square(),
    ]
    for prob in probs:
        report = certify(prob, samples=2000)
        assert report.passed
        assert "VIOLATED" not in report.summary()


def test_certify_catches_understated_weak_convexity():
    liar = custom_quadratic([[1.0, -0.8], [1.0, 1.7]], declared_tau=0.2)
    with pytest.raises(CertificationError) as err:
        certify(liar, samples=4000)
    msg = str(err.value)
    assert "cocoercivity_interpolation" in msg
    assert "witness" in msg
    report = certify(liar, samples=4000, raise_on_failure=False)
    assert not report.passed


def test_certify_catches_understated_smoothness():
    liar = custom_quadratic([[2.0, 0.1], [1.5, 0.3]], declared_L=1.0)
    with pytest.raises(CertificationError):
        certify(liar, samples=4000)


def test_certify_catches_overstated_dominance():
    liar = custom_quadratic([[0.5, 0.1], [0.5, 0.3]], declared_mu=0.45)
    with pytest.raises(CertificationError, match="gradient_dominance"):
        certify(liar, samples=4000)


def test_spec_roundtrip():
    spec = ProblemSpec(family="custom_quadratic", n=2, d=2, target_L=1.3,
                       target_tau=0.5, target_mu=0.4, seed=0,
                       curvatures=((1.0, -0.5), (0.2, 1.3)))
    back = ProblemSpec.from_dict(spec.to_dict())
    assert back == spec


def test_generate_rejects_unknown_family():
    with pytest.raises(GenerationError, match="unknown family"):
        generate(ProblemSpec(family="mystery", n=2, d=2, target_L=1.0,
                             target_tau=0.0, seed=0))
