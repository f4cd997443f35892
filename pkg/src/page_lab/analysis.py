"""Standalone numerical verifiers and trajectory measurement utilities.

The two inequality slacks here hold for any L-smooth function that is
tau-weakly convex (g + tau/2 |.|^2 convex with tau <= L):

* interpolated cocoercivity, with dg = grad(x) - grad(y) and dx = x - y:
      |dg|^2 <= (L - tau) <dg, dx> + L tau |dx|^2.
  At tau = 0 this is cocoercivity of the gradient, at tau = L plain
  Lipschitzness; in between it interpolates.

* shifted monotonicity, with dop = (grad(x) + L x) - (grad(y) + L y):
      2 L <dop, dx> - |dop|^2 >= 0,
  i.e. grad + L Id is monotone and 1/(2L)-cocoercive; this is the elementary
  fact the interpolated inequality rests on.

Slack is rhs - lhs, so nonnegative means the inequality holds; checks pass
at slack >= -1e-9 max(1, |rhs|).
"""

from __future__ import annotations

import numpy as np


class RateFitError(ValueError):
    """Not enough usable points to fit a decay rate."""


def interpolated_cocoercivity_slack(grad, L: float, tau: float, x, y) -> float:
    """Slack of the interpolated inequality for one pair of points; grad maps
    a point to a gradient vector."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dg = np.asarray(grad(x), dtype=np.float64) - np.asarray(grad(y), dtype=np.float64)
    dx = x - y
    lhs = float(np.sum(dg * dg))
    rhs = (L - tau) * float(np.sum(dg * dx)) + L * tau * float(np.sum(dx * dx))
    return rhs - lhs


def shifted_monotonicity_slack(grad, L: float, x, y) -> float:
    """Slack of 2 L <dop, dx> >= |dop|^2 for the L-shifted gradient map."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    dop = (np.asarray(grad(x), dtype=np.float64) + L * x) \
        - (np.asarray(grad(y), dtype=np.float64) + L * y)
    dx = x - y
    return 2.0 * L * float(np.sum(dop * dx)) - float(np.sum(dop * dop))


def interpolated_cocoercivity_slacks(Gx, Gy, X, Y, L, tau):
    """Vectorized slacks and pass scales for many pairs at once; rows of the
    inputs are gradients and points.  Returns (slack, scale) arrays; a pair
    passes when slack >= -1e-9 * scale."""
    dg = Gx - Gy
    dx = X - Y
    lhs = np.sum(dg * dg, axis=-1)
    rhs = (L - tau) * np.sum(dg * dx, axis=-1) + L * tau * np.sum(dx * dx, axis=-1)
    return rhs - lhs, np.maximum(1.0, np.abs(rhs))


def shifted_monotonicity_slacks(Gx, Gy, X, Y, L):
    """Vectorized form of shifted_monotonicity_slack; returns (slack, scale)."""
    dop = (Gx + L * X) - (Gy + L * Y)
    dx = X - Y
    rhs = 2.0 * L * np.sum(dop * dx, axis=-1)
    lhs = np.sum(dop * dop, axis=-1)
    return rhs - lhs, np.maximum(1.0, np.abs(rhs))


def slack_ok(slack, scale) -> bool:
    """Pass rule shared by the inequality suites."""
    return bool(np.all(np.asarray(slack) >= -1e-9 * np.asarray(scale)))


def finite_difference_gradient(value, x, h: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function, one coordinate at a
    time; the reference oracle for testing analytic gradients."""
    x = np.asarray(x, dtype=np.float64)
    out = np.zeros_like(x)
    for j in range(x.shape[0]):
        e = np.zeros_like(x)
        e[j] = h
        out[j] = (value(x + e) - value(x - e)) / (2.0 * h)
    return out


def gradient_suboptimality_slack(problem, x) -> float:
    """Slack of |grad f(x)|^2 <= 2 L (f(x) - f_star), the smoothness bound
    that converts value gaps into gradient-norm bounds (used to size the
    extra potential mass of a zero start estimate)."""
    f_star = problem.profile.require_f_star()
    g = problem.full_gradient(x)
    lhs = float(np.sum(g * g))
    rhs = 2.0 * problem.profile.L * (problem.value(x) - f_star)
    return rhs - lhs


def fit_linear_rate(series, floor: float = 1e-14, min_points: int = 10,
                    ts=None) -> float:
    """Per-iteration decay factor of a positive series, by least squares on
    the log values.

    The series is truncated at the first entry at or below the floor, so the
    fit never chases rounding noise near zero.  Requires at least min_points
    usable leading entries.  ts gives the iteration number of each entry;
    default is 0, 1, 2, ..."""
    vals = np.asarray([s if not hasattr(s, "psi") else s.psi for s in series],
                      dtype=np.float64)
    if vals.ndim != 1:
        raise RateFitError(f"series must be 1-d, got shape {vals.shape}")
    if ts is None:
        ts = np.arange(vals.shape[0], dtype=np.float64)
    else:
        ts = np.asarray(ts, dtype=np.float64)
        if ts.shape != vals.shape:
            raise RateFitError(
                f"ts has shape {ts.shape}, series has shape {vals.shape}"
            )
    below = np.nonzero(vals <= floor)[0]
    cut = int(below[0]) if below.size else vals.shape[0]
    vals = vals[:cut]
    ts = ts[:cut]
    if vals.shape[0] < min_points:
        raise RateFitError(
            f"only {vals.shape[0]} points above the floor {floor}; "
            f"need at least {min_points}"
        )
    slope = np.polyfit(ts, np.log(vals), 1)[0]
    return float(np.exp(slope))


def average_grad_norm(records) -> float:
    """Mean of |grad f(x_t)|^2 over a trajectory, the quantity the sublinear
    guarantee bounds.  Accepts trajectory records or a plain array."""
    vals = np.asarray([r.grad_norm_sq if hasattr(r, "grad_norm_sq") else r
                       for r in records], dtype=np.float64)
    if vals.size == 0:
        raise ValueError("average_grad_norm needs at least one record")
    return float(np.mean(vals))
