"""Seeded generators for finite-sum test problems with certified constants.

Families:

* interpolated_quadratic: diagonal quadratics f_i(x) = x'(D + E_i)x / 2 whose
  curvature offsets E_i average to zero coordinatewise, so the average is
  f(x) = x'Dx / 2 with minimizer 0 and f_star = 0.  Component curvatures sit
  inside [-tau, L] by construction (with one pair pinned to the extremes), so
  L and tau are exact certificates, and f is gradient dominated with
  mu = min D.
* logistic: binary logistic losses on generated features, convex components
  (tau = 0) with L = max_i |a_i|^2 / 4; f_star comes from a deterministic
  reference minimization, or is 0 when the data are separable and no
  minimizer exists.
* half_square: f(x1, x2) = x1^2 / 2, gradient dominated with mu = 1 although
  not strongly convex (flat along x2).
* custom_quadratic: caller-supplied diagonal component curvatures with
  optionally overridden declared constants; the override path exists so
  certification failures can be exercised.

certify() samples the declared inequalities at random points and fails
loudly, naming the inequality and a witness, if any is violated beyond
tolerance.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit

from .core import (
    FiniteSumProblem,
    NonFiniteError,
    SmoothnessProfile,
    freeze,
)

FAMILIES = ("interpolated_quadratic", "logistic", "half_square", "custom_quadratic")


class GenerationError(ValueError):
    """A problem spec asks for an instance that cannot be built."""


class CertificationError(ValueError):
    """A declared constant failed its sampled inequality check."""


@dataclass(frozen=True)
class ProblemSpec:
    """Generation inputs: family name, sizes, target constants and seed.

    target_mu is the requested gradient-dominance constant for families that
    can hit one exactly; None lets the generator pick its default.
    curvatures is only meaningful for the custom_quadratic family.
    """

    family: str
    n: int = 1
    d: int = 1
    target_L: float = 1.0
    target_tau: float = 0.0
    target_mu: float | None = None
    seed: int = 0
    curvatures: tuple = field(default=())

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise GenerationError(
                f"unknown family {self.family!r}, expected one of {FAMILIES}"
            )
        if self.n < 1 or self.d < 1:
            raise GenerationError(f"sizes must be positive, got n={self.n} d={self.d}")
        if self.seed < 0:
            raise GenerationError(f"seed must be nonnegative, got {self.seed}")

    def to_dict(self) -> dict:
        out = {
            "family": self.family,
            "n": self.n,
            "d": self.d,
            "target_L": self.target_L,
            "target_tau": self.target_tau,
            "target_mu": self.target_mu,
            "seed": self.seed,
        }
        if self.curvatures:
            out["curvatures"] = [list(row) for row in self.curvatures]
        return out

    @classmethod
    def from_dict(cls, raw: dict) -> "ProblemSpec":
        curv = raw.get("curvatures", ())
        if curv:
            curv = tuple(tuple(float(v) for v in row) for row in curv)
        return cls(
            family=raw["family"],
            n=int(raw.get("n", 1)),
            d=int(raw.get("d", 1)),
            target_L=float(raw.get("target_L", 1.0)),
            target_tau=float(raw.get("target_tau", 0.0)),
            target_mu=(None if raw.get("target_mu") is None
                       else float(raw["target_mu"])),
            seed=int(raw.get("seed", 0)),
            curvatures=curv,
        )


def _rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=seed))


class DiagonalQuadraticProblem(FiniteSumProblem):
    """Components f_i(x) = x'(D + E_i)x / 2 on a shared diagonal D.

    The offsets E_i average to zero coordinatewise, so the average objective
    is x'Dx / 2 exactly and the closed-form full gradient is D x.
    """

    def __init__(self, D: np.ndarray, E: np.ndarray,
                 profile: SmoothnessProfile, spec: ProblemSpec | None = None):
        n, d = E.shape
        super().__init__(n, d, profile)
        if D.shape != (d,):
            raise ValueError(f"D has shape {D.shape}, expected ({d},)")
        self.D = freeze(np.array(D, dtype=np.float64))
        self.E = freeze(np.array(E, dtype=np.float64))
        self.spec = spec
        self.minimizer = freeze(np.zeros(d))

    def batch_value(self, X):
        return 0.5 * np.sum(self.D * X * X, axis=-1)

    def batch_full_gradient(self, X):
        return self.D * X

    def batch_component_gradient(self, indices, X):
        return (self.D + self.E[indices]) * X

    def _describe_dict(self):
        out = super()._describe_dict()
        if self.spec is not None:
            out["spec"] = self.spec.to_dict()
        return out


class LogisticProblem(FiniteSumProblem):
    """Components f_i(x) = log(1 + exp(-y_i a_i'x)) for labels y_i in {-1, 1}.

    Convex (tau = 0) with component smoothness |a_i|^2 / 4.  has_minimizer
    is False for separable data, where the infimum 0 is not attained.
    """

    def __init__(self, A: np.ndarray, y: np.ndarray,
                 profile: SmoothnessProfile, spec: ProblemSpec | None = None,
                 has_minimizer: bool = True,
                 reference_point: np.ndarray | None = None):
        n, d = A.shape
        super().__init__(n, d, profile)
        self.A = freeze(np.array(A, dtype=np.float64))
        self.y = freeze(np.array(y, dtype=np.float64))
        self.spec = spec
        self.has_minimizer = bool(has_minimizer)
        self.reference_point = (None if reference_point is None
                                else freeze(np.array(reference_point)))

    def _margins(self, X):
        # (R, n): y_i a_i' x_r, via an elementwise sum to keep reductions
        # identical between batch sizes
        return np.sum((self.y[:, None] * self.A)[None, :, :] * X[:, None, :],
                      axis=-1)

    def batch_value(self, X):
        m = self._margins(X)
        return np.mean(np.logaddexp(0.0, -m), axis=-1)

    def batch_full_gradient(self, X):
        m = self._margins(X)
        s = expit(-m)  # (R, n)
        return -np.sum(s[:, :, None] * (self.y[:, None] * self.A)[None, :, :],
                       axis=1) / self.n

    def batch_component_gradient(self, indices, X):
        rows = self.A[indices]                      # (R, d)
        ys = self.y[indices]                        # (R,)
        m = ys * np.sum(rows * X, axis=-1)          # (R,)
        return (-ys * expit(-m))[:, None] * rows

    def _describe_dict(self):
        out = super()._describe_dict()
        out["has_minimizer"] = self.has_minimizer
        if self.spec is not None:
            out["spec"] = self.spec.to_dict()
        return out


def interpolated_quadratic(spec: ProblemSpec) -> DiagonalQuadraticProblem:
    """Generate a diagonal quadratic family hitting (L, tau, mu) exactly.

    D is drawn in [mu, max(mu, L - tau)] with the extremes pinned; offsets
    come in +/- pairs with per-coordinate amplitude at most min(tau, L - D_j),
    one pair pinned at that cap so the largest component curvature equals L
    exactly while every curvature stays within [-tau, L].  Requires n >= 2
    whenever tau > 0, since a single component with a zero-mean offset would
    need E_1 = 0.
    """
    if spec.family != "interpolated_quadratic":
        raise GenerationError(f"spec family {spec.family!r} is not interpolated_quadratic")
    L, tau = float(spec.target_L), float(spec.target_tau)
    if not (L > 0 and np.isfinite(L)):
        raise GenerationError(f"target_L must be positive, got {L}")
    if not (0.0 <= tau <= L):
        raise GenerationError(f"target_tau must lie in [0, L], got {tau}")
    mu = L / 100.0 if spec.target_mu is None else float(spec.target_mu)
    if not (0.0 < mu <= L):
        raise GenerationError(f"target_mu must lie in (0, L], got {mu}")
    if tau > 0 and spec.n < 2:
        raise GenerationError("tau > 0 needs n >= 2 to keep offsets zero mean")
    n, d = spec.n, spec.d
    rng = _rng(spec.seed)

    dmax = max(mu, L - tau)
    if mu > dmax:
        raise GenerationError(f"mu={mu} exceeds the largest mean curvature {dmax}")
    if d == 1:
        D = np.array([mu])
    else:
        mids = rng.uniform(mu, dmax, size=max(d - 2, 0))
        D = np.concatenate([[mu], mids, [dmax]])
    E = np.zeros((n, d))
    if tau > 0.0:
        amp = np.minimum(tau, L - D)        # max offset keeping spectra in [-tau, L]
        npairs = n // 2
        V = rng.uniform(0.0, 1.0, size=(npairs, d)) * amp
        V[0] = amp                           # pin one pair to the extremes
        E[0:2 * npairs:2] = V
        E[1:2 * npairs:2] = -V

    curv = D + E
    if curv.max() > L * (1 + 1e-12) or curv.min() < -tau * (1 + 1e-12) - 1e-15:
        raise GenerationError("internal construction error: spectrum out of range")
    profile = SmoothnessProfile(L=L, tau=tau, mu=mu, f_star=0.0)
    return DiagonalQuadraticProblem(D, E, profile, spec)


def half_square() -> DiagonalQuadraticProblem:
    """f(x1, x2) = x1^2 / 2: gradient dominated with mu = 1 and equality in
    the dominance inequality, yet not strongly convex."""
    spec = ProblemSpec(family="half_square", n=1, d=2, target_L=1.0,
                       target_tau=0.0, target_mu=1.0, seed=0)
    profile = SmoothnessProfile(L=1.0, tau=0.0, mu=1.0, f_star=0.0)
    return DiagonalQuadraticProblem(np.array([1.0, 0.0]), np.zeros((1, 2)),
                                    profile, spec)


def custom_quadratic(curvatures, declared_L: float | None = None,
                     declared_tau: float | None = None,
                     declared_mu: float | None = None) -> DiagonalQuadraticProblem:
    """Diagonal quadratic family from explicit per-component curvatures.

    Constants default to the exact values read off the curvature matrix;
    explicit declarations are taken at face value so that certify() can be
    shown to catch lies.  The mean curvature must be nonnegative in every
    coordinate or the average is unbounded below.
    """
    C = np.array(curvatures, dtype=np.float64)
    if C.ndim != 2:
        raise GenerationError(f"curvatures must be 2-d, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise GenerationError("curvatures contain non-finite entries")
    n, d = C.shape
    mean_curv = np.mean(C, axis=0)
    if np.any(mean_curv < 0):
        raise GenerationError(
            "mean curvature is negative in some coordinate; the average "
            "objective would be unbounded below"
        )
    L = float(np.max(np.abs(C))) if declared_L is None else float(declared_L)
    if L <= 0:
        raise GenerationError("declared or derived L must be positive")
    tau = (float(max(0.0, -np.min(C))) if declared_tau is None
           else float(declared_tau))
    if declared_mu is None:
        positive = mean_curv[mean_curv > 0]
        mu = float(np.min(positive)) if positive.size else None
    else:
        mu = float(declared_mu)
    profile = SmoothnessProfile(L=L, tau=tau, mu=mu, f_star=0.0)
    spec = ProblemSpec(family="custom_quadratic", n=n, d=d, target_L=L,
                       target_tau=tau, target_mu=mu, seed=0,
                       curvatures=tuple(tuple(row) for row in C))
    return DiagonalQuadraticProblem(mean_curv, C - mean_curv, profile, spec)


def _minimize_logistic(A: np.ndarray, y: np.ndarray):
    """Damped Newton on the average logistic loss to |grad| <= 1e-12.

    Returns (f_star, x_opt, True) at a minimizer, or (0.0, None, False) when
    iterates run off to infinity, which certifies separable data with
    infimum 0 and no minimizer.
    """
    n, d = A.shape
    Z = y[:, None] * A
    x = np.zeros(d)

    def fval(x):
        return float(np.mean(np.logaddexp(0.0, -Z @ x)))

    def grad(x):
        return -(Z.T @ expit(-(Z @ x))) / n

    f = fval(x)
    for _ in range(500):
        m = Z @ x
        s = expit(-m)
        g = -(Z.T @ s) / n
        gnorm = float(np.sqrt(np.sum(g * g)))
        if gnorm <= 1e-12:
            # a vanishing minimum means (near-)separable data; 0 is then the
            # only safe lower bound and no finite minimizer is claimed
            if f <= 1e-9:
                return 0.0, None, False
            return f, x, True
        if float(np.sqrt(np.sum(x * x))) > 1e8 or f < 1e-13:
            return 0.0, None, False
        w = s * (1.0 - s)
        H = (Z.T * w) @ Z / n + 1e-14 * np.eye(d)
        try:
            direction = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            direction = -g
        step = 1.0
        for _ in range(60):
            f_new = fval(x + step * direction)
            if f_new <= f + 1e-4 * step * float(g @ direction):
                break
            step *= 0.5
        x = x + step * direction
        f = f_new
    # did not hit the tolerance; distinguish flat-at-zero from failure
    if f < 1e-13:
        return 0.0, None, False
    raise GenerationError(
        f"reference minimization stalled at |grad|={gnorm:.3e}; instance rejected"
    )


def logistic(spec: ProblemSpec) -> LogisticProblem:
    """Generate a logistic-loss family with max_i |a_i|^2 / 4 = target_L.

    Features are Gaussian, rescaled so the largest row norm hits the target
    smoothness exactly; labels follow a planted direction with a fixed 15%
    flip rate so instances are usually non-separable.  target_tau must be 0
    and target_mu must be unset, since the certificates come from convexity
    and the reference minimization rather than from targets.
    """
    if spec.family != "logistic":
        raise GenerationError(f"spec family {spec.family!r} is not logistic")
    if spec.target_tau != 0.0:
        raise GenerationError("logistic components are convex; target_tau must be 0")
    if spec.target_mu is not None:
        raise GenerationError("logistic has no certified mu; leave target_mu unset")
    L = float(spec.target_L)
    if not (L > 0 and np.isfinite(L)):
        raise GenerationError(f"target_L must be positive, got {L}")
    n, d = spec.n, spec.d
    rng = _rng(spec.seed)

    A = rng.normal(size=(n, d))
    row_sq = np.sum(A * A, axis=1)
    A = A * np.sqrt(4.0 * L / np.max(row_sq))
    w = rng.normal(size=d)
    margins = np.sum(A * w, axis=1) + 0.3 * rng.normal(size=n)
    ylab = np.where(margins >= 0.0, 1.0, -1.0)
    flips = rng.random(n) < 0.15
    ylab = ylab * np.where(flips, -1.0, 1.0)

    L_cert = float(np.max(np.sum(A * A, axis=1)) / 4.0)
    f_star, x_opt, has_min = _minimize_logistic(A, ylab)
    profile = SmoothnessProfile(L=L_cert, tau=0.0, mu=None, f_star=f_star)
    return LogisticProblem(A, ylab, profile, spec, has_minimizer=has_min,
                           reference_point=x_opt)


def generate(spec: ProblemSpec) -> FiniteSumProblem:
    """Build the instance a spec describes; deterministic in the seed."""
    if spec.family == "interpolated_quadratic":
        return interpolated_quadratic(spec)
    if spec.family == "logistic":
        return logistic(spec)
    if spec.family == "half_square":
        return half_square()
    if spec.family == "custom_quadratic":
        if not spec.curvatures:
            raise GenerationError("custom_quadratic needs explicit curvatures")
        return custom_quadratic(spec.curvatures)
    raise GenerationError(f"unknown family {spec.family!r}")


@dataclass(frozen=True)
class CheckResult:
    name: str
    checks: int
    worst_slack: float
    witness: dict
    passed: bool


@dataclass(frozen=True)
class CertificationReport:
    results: tuple

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def summary(self) -> str:
        lines = []
        for r in self.results:
            tag = "ok" if r.passed else "VIOLATED"
            lines.append(
                f"{r.name}: {tag}, {r.checks} samples, worst slack {r.worst_slack:.3e}"
            )
        return "\n".join(lines)


def _sample_points(rng, count, d):
    # mixed scales exercise both the quadratic-dominated and the
    # curvature-dominated regimes of each inequality
    scale = 10.0 ** rng.uniform(-1.0, 1.0, size=(count, 1))
    return rng.normal(size=(count, d)) * scale


def certify(problem: FiniteSumProblem, samples: int,
            rng: np.random.Generator | None = None,
            raise_on_failure: bool = True) -> CertificationReport:
    """Sample-check the declared constants on random points.

    Verifies, on `samples` random (component, x, y) triples,
      (i)  |grad f_i(x) - grad f_i(y)| <= L |x - y|,
      (ii) |dg|^2 <= (L - tau) <dg, dx> + L tau |dx|^2 for dg, dx the
           component gradient and point differences,
    and, when mu is certified, on the x points
      (iii) |grad f(x)|^2 >= 2 mu (f(x) - f_star).
    A violation beyond 1e-9 * max(1, |rhs|) raises CertificationError naming
    the inequality and the witness sample.
    """
    if samples < 1:
        raise ValueError(f"samples must be positive, got {samples}")
    if rng is None:
        rng = _rng(0)
    prof = problem.profile
    L, tau = prof.L, prof.tau
    d = problem.d

    idx = rng.integers(0, problem.n, size=samples)
    X = _sample_points(rng, samples, d)
    Y = _sample_points(rng, samples, d)
    Gx = problem.batch_component_gradient(idx, X)
    Gy = problem.batch_component_gradient(idx, Y)
    if not (np.all(np.isfinite(Gx)) and np.all(np.isfinite(Gy))):
        raise NonFiniteError("component gradient non-finite during certification")
    dg = Gx - Gy
    dx = X - Y
    dg_sq = np.sum(dg * dg, axis=1)
    dx_sq = np.sum(dx * dx, axis=1)
    inner = np.sum(dg * dx, axis=1)

    results = []

    def finish(name, slack, scale, witness_of):
        worst = int(np.argmin(slack / scale))
        tol = 1e-9 * scale
        passed = bool(np.all(slack >= -tol))
        results.append(CheckResult(
            name=name,
            checks=samples,
            worst_slack=float(slack[worst]),
            witness=witness_of(worst),
            passed=passed,
        ))

    def pair_witness(k):
        return {"component": int(idx[k]), "x": X[k].tolist(), "y": Y[k].tolist()}

    rhs_lip = L * L * dx_sq
    finish("component_lipschitz", rhs_lip - dg_sq, np.maximum(1.0, rhs_lip),
           pair_witness)

    rhs_int = (L - tau) * inner + L * tau * dx_sq
    finish("cocoercivity_interpolation", rhs_int - dg_sq,
           np.maximum(1.0, np.abs(rhs_int)), pair_witness)

    if prof.mu is not None:
        f_star = prof.require_f_star()
        vals = problem.batch_value(X)
        full = problem.batch_full_gradient(X)
        lhs_pl = np.sum(full * full, axis=1)
        rhs_pl = 2.0 * prof.mu * (vals - f_star)
        finish("gradient_dominance", lhs_pl - rhs_pl,
               np.maximum(1.0, np.abs(rhs_pl)),
               lambda k: {"x": X[k].tolist()})

    report = CertificationReport(results=tuple(results))
    if raise_on_failure and not report.passed:
        bad = next(r for r in report.results if not r.passed)
        raise CertificationError(
            f"certification failed: {bad.name} violated with slack "
            f"{bad.worst_slack:.6e} at witness {bad.witness}"
        )
    return report
