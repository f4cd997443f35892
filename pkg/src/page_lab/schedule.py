"""Stepsize bounds, potential coefficients, contraction factors and
complexity predictors for the two convergence regimes.

Linear regime (gradient-dominated average): with w = gamma (L - tau),
    a = 1 - w/2,   b = w/2,   a + b = 1,
    rho = max(1 - (1 - 2b) gamma mu,  1 - p (1 - 1/(2a))),
valid whenever gamma <= 1 / (L (1 + sqrt(4 tau / (L + tau)) sqrt((1-p)/p))).

Sublinear regime (general weakly convex components):
    a = 1/2,   b = w / (4 - 2w),
valid whenever gamma <= 1 / (L (1 + sqrt(2 tau / (L + tau)) sqrt((1-p)/p))),
and the averaged squared gradient norm over t = 0..T is bounded by
    2 Psi0 / ((T + 1) (gamma - gamma^2 (L - tau))).

Both coefficient choices satisfy b (2 - w) = a w, the relation that cancels
the cross inner product in the one-step expansion, and b gamma <= 1/(2L),
which keeps the potential nonnegative.  When tau = 0 the stepsize must be
strictly below 1/L so that b < 1/2 stays strict.
"""

from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

from .core import SmoothnessProfile


class ScheduleError(ValueError):
    """A rate-theory precondition failed; the message names the inequality."""


class RateMode(str, enum.Enum):
    LINEAR = "linear"
    SUBLINEAR = "sublinear"


def _check_p(p: float) -> float:
    p = float(p)
    if not (0.0 < p <= 1.0) or not math.isfinite(p):
        raise ScheduleError(f"coin probability must satisfy 0 < p <= 1, got {p}")
    return p


def _gamma_max(profile: SmoothnessProfile, p: float, c: float) -> float:
    p = _check_p(p)
    L, tau = profile.L, profile.tau
    radical = math.sqrt(c * tau / (L + tau)) * math.sqrt((1.0 - p) / p)
    return 1.0 / (L * (1.0 + radical))


def gamma_max_linear(profile: SmoothnessProfile, p: float) -> float:
    """Largest stepsize with a guaranteed linear rate; equals 1/L when
    tau = 0 or p = 1 and shrinks like sqrt(p/tau) otherwise."""
    return _gamma_max(profile, p, 4.0)


def gamma_max_sublinear(profile: SmoothnessProfile, p: float) -> float:
    """Largest stepsize for the sublinear guarantee; never below the linear
    one because its radical carries 2 tau instead of 4 tau."""
    return _gamma_max(profile, p, 2.0)


def resolve_gamma(profile: SmoothnessProfile, p: float, mode: RateMode,
                  eta: float = 0.9) -> float:
    """Stepsize eta * gamma_max for the given regime, 0 < eta < 1."""
    if not (0.0 < eta < 1.0):
        raise ScheduleError(f"eta must satisfy 0 < eta < 1, got {eta}")
    if mode == RateMode.LINEAR:
        return eta * gamma_max_linear(profile, p)
    return eta * gamma_max_sublinear(profile, p)


def validate_stepsize(gamma: float, profile: SmoothnessProfile, p: float,
                      mode: RateMode) -> None:
    """Raise unless gamma is admissible for the regime at this p.

    Checks gamma <= gamma_max(mode, p) and, when tau = 0, the strict
    inequality gamma < 1/L."""
    gamma = float(gamma)
    if not math.isfinite(gamma) or gamma <= 0:
        raise ScheduleError(f"stepsize must be positive and finite, got {gamma}")
    if mode == RateMode.LINEAR:
        bound = gamma_max_linear(profile, p)
    elif mode == RateMode.SUBLINEAR:
        bound = gamma_max_sublinear(profile, p)
    else:
        raise ScheduleError(f"unknown rate mode {mode!r}")
    if gamma > bound:
        raise ScheduleError(
            f"stepsize bound violated: gamma <= {bound:.17g} required for the "
            f"{mode.value} regime at p={p}, got gamma={gamma:.17g}"
        )
    if profile.tau == 0.0 and gamma >= 1.0 / profile.L:
        raise ScheduleError(
            f"stepsize bound violated: gamma < 1/L required when tau = 0, "
            f"got gamma={gamma:.17g} with 1/L={1.0 / profile.L:.17g}"
        )


@dataclass(frozen=True)
class LyapunovCoefficients:
    """Weights (a, b) of the potential for one regime.

    Invariants: 1/2 <= a <= 1, 0 <= b < 1/2, b(2 - w) = a w for
    w = gamma (L - tau), and b gamma <= 1/(2L).  The linear regime
    additionally has a + b = 1 and a > 1/2.
    """

    a: float
    b: float
    mode: RateMode

    def check(self, gamma: float, profile: SmoothnessProfile) -> None:
        """Assert the defining relations for this gamma and profile."""
        w = gamma * (profile.L - profile.tau)
        if not 0.5 <= self.a <= 1.0:
            raise ScheduleError(f"coefficient a={self.a} outside [1/2, 1]")
        if not 0.0 <= self.b < 0.5:
            raise ScheduleError(f"coefficient b={self.b} outside [0, 1/2)")
        lhs = self.b * (2.0 - w)
        rhs = self.a * w
        if abs(lhs - rhs) > 1e-12 * max(1.0, abs(rhs)):
            raise ScheduleError(
                f"coefficient relation b(2 - w) = a w violated: {lhs} vs {rhs}"
            )
        if self.b * gamma > 0.5 / profile.L + 1e-15:
            raise ScheduleError(
                f"nonnegativity condition b gamma <= 1/(2L) violated: "
                f"{self.b * gamma} > {0.5 / profile.L}"
            )


def coefficients(gamma: float, profile: SmoothnessProfile,
                 mode: RateMode) -> LyapunovCoefficients:
    """Potential coefficients for a stepsize.

    Requires 0 < gamma <= 1/L, strictly below 1/L when tau = 0.  The
    p-dependent admissibility of gamma is checked where p is known, via
    validate_stepsize."""
    gamma = float(gamma)
    L, tau = profile.L, profile.tau
    if not math.isfinite(gamma) or gamma <= 0:
        raise ScheduleError(f"stepsize must be positive and finite, got {gamma}")
    if gamma > 1.0 / L:
        raise ScheduleError(
            f"stepsize bound violated: gamma <= 1/L required, got "
            f"gamma={gamma:.17g} with 1/L={1.0 / L:.17g}"
        )
    if tau == 0.0 and gamma >= 1.0 / L:
        raise ScheduleError(
            f"stepsize bound violated: gamma < 1/L required when tau = 0, "
            f"got gamma={gamma:.17g} with 1/L={1.0 / L:.17g}"
        )
    w = gamma * (L - tau)
    if mode == RateMode.LINEAR:
        a = 1.0 - w / 2.0
        b = w / 2.0
    elif mode == RateMode.SUBLINEAR:
        a = 0.5
        b = w / (4.0 - 2.0 * w)
    else:
        raise ScheduleError(f"unknown rate mode {mode!r}")
    out = LyapunovCoefficients(a=a, b=b, mode=mode)
    out.check(gamma, profile)
    return out


def contraction_factor(gamma: float, p: float, coeffs: LyapunovCoefficients,
                       profile: SmoothnessProfile) -> float:
    """Per-iteration factor rho = max(1 - (1-2b) gamma mu, 1 - p(1 - 1/(2a))).

    Requires linear-regime coefficients and a profile with mu.  The result
    lies in (0, 1) for any admissible stepsize; a nonpositive value can only
    arise from floating-point rounding and is clamped to 0 with a warning.
    """
    if coeffs.mode != RateMode.LINEAR:
        raise ScheduleError("contraction factor requires linear-regime coefficients")
    if profile.mu is None:
        raise ScheduleError("contraction factor requires a gradient-dominance mu")
    p = _check_p(p)
    arg_decay = 1.0 - (1.0 - 2.0 * coeffs.b) * gamma * profile.mu
    arg_refresh = 1.0 - p * (1.0 - 0.5 / coeffs.a)
    rho = max(arg_decay, arg_refresh)
    if rho >= 1.0:
        raise ScheduleError(
            f"contraction factor not below 1 (rho={rho}); preconditions "
            f"0 < gamma, b < 1/2, a > 1/2, mu > 0 must all hold"
        )
    if rho < 0.0:
        warnings.warn("contraction factor clamped to 0 after rounding")
        rho = 0.0
    return rho


@dataclass(frozen=True)
class RatePrediction:
    """Predicted linear-regime behavior for one configuration."""

    rho: float
    iteration_factor: float
    gradient_factor: float


def iteration_complexity_linear(profile: SmoothnessProfile, p: float,
                                eta: float = 0.9) -> float:
    """Iteration-count factor kappa + kappa sqrt(tau/(L p)) + 1/p.

    The epsilon-accurate count is this factor times O(log(Psi0/eps)); the
    constant absorbed by O() depends only on eta."""
    if not (0.0 < eta < 1.0):
        raise ScheduleError(f"eta must satisfy 0 < eta < 1, got {eta}")
    p = _check_p(p)
    kap = profile.kappa() if profile.mu is not None else None
    if kap is None:
        raise ScheduleError("iteration complexity requires a gradient-dominance mu")
    return kap + kap * math.sqrt(profile.tau / (profile.L * p)) + 1.0 / p


def gradient_complexity_linear(profile: SmoothnessProfile, p: float, n: int,
                               eta: float = 0.9) -> float:
    """Gradient-evaluation factor for the linear regime.

    Multiplies the iteration factor by the mean per-iteration cost
    p n + 2(1 - p), expanded and simplified with sqrt(1 - p) <= 1:
    kappa + kappa p n + kappa sqrt(tau/(L p)) + kappa sqrt(tau/L) n sqrt(p)
    + 1/p + n."""
    if not (0.0 < eta < 1.0):
        raise ScheduleError(f"eta must satisfy 0 < eta < 1, got {eta}")
    p = _check_p(p)
    if profile.mu is None:
        raise ScheduleError("gradient complexity requires a gradient-dominance mu")
    kap = profile.kappa()
    ratio = math.sqrt(profile.tau / profile.L)
    return (kap + kap * p * n + kap * math.sqrt(profile.tau / (profile.L * p))
            + kap * ratio * n * math.sqrt(p) + 1.0 / p + n)


def predict_linear(profile: SmoothnessProfile, p: float, n: int,
                   eta: float = 0.9) -> RatePrediction:
    gamma = resolve_gamma(profile, p, RateMode.LINEAR, eta)
    co = coefficients(gamma, profile, RateMode.LINEAR)
    return RatePrediction(
        rho=contraction_factor(gamma, p, co, profile),
        iteration_factor=iteration_complexity_linear(profile, p, eta),
        gradient_factor=gradient_complexity_linear(profile, p, n, eta),
    )


def sublinear_bound(psi0: float, gamma: float, profile: SmoothnessProfile,
                    T: int) -> float:
    """Guaranteed value of the averaged squared gradient norm over t = 0..T:
    2 Psi0 / ((T + 1) (gamma - gamma^2 (L - tau)))."""
    if psi0 < 0:
        raise ScheduleError(f"initial potential must be nonnegative, got {psi0}")
    if T < 0:
        raise ScheduleError(f"horizon must be nonnegative, got {T}")
    denom = gamma - gamma * gamma * (profile.L - profile.tau)
    if denom <= 0:
        raise ScheduleError(
            f"bound denominator gamma - gamma^2 (L - tau) must be positive, "
            f"got {denom} at gamma={gamma}"
        )
    return 2.0 * psi0 / ((T + 1) * denom)
