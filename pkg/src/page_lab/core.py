"""Dense vectors and the finite-sum oracle interface.

The objective is an average f(x) = (1/n) sum_i f_i(x) of n smooth components
queried through gradient oracles.  A SmoothnessProfile carries the certified
constants every rate formula consumes: L (component smoothness), tau
(component weak convexity, 0 <= tau <= L), an optional gradient-dominance
constant mu of the average, and the optional infimum f_star.

All vectors are 1-d float64 arrays, frozen after validation, so algorithm
state never aliases caller memory and never carries NaN or Inf.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass

import numpy as np


class DimensionMismatchError(ValueError):
    """Vector or index shape does not match the problem."""


class NonFiniteError(ValueError):
    """A NaN or Inf crossed an oracle boundary."""


def freeze(a: np.ndarray) -> np.ndarray:
    """Mark an array read-only and return it."""
    a.flags.writeable = False
    return a


def as_vector(x, d: int | None = None, name: str = "vector") -> np.ndarray:
    """Validate and copy input into a frozen 1-d float64 array.

    Rejects wrong dimensionality, wrong length (when d is given) and
    non-finite entries.  The returned array is a private frozen copy, so
    later mutation by the caller cannot reach into algorithm state.
    """
    v = np.array(x, dtype=np.float64, copy=True)
    if v.ndim != 1:
        raise DimensionMismatchError(f"{name} must be 1-d, got shape {v.shape}")
    if v.shape[0] < 1:
        raise DimensionMismatchError(f"{name} must have at least one entry")
    if d is not None and v.shape[0] != d:
        raise DimensionMismatchError(
            f"{name} has length {v.shape[0]}, expected {d}"
        )
    if not np.all(np.isfinite(v)):
        raise NonFiniteError(f"{name} contains non-finite entries")
    return freeze(v)


def squared_norm(v) -> float:
    """Squared Euclidean norm as a python float."""
    a = np.asarray(v, dtype=np.float64)
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("squared_norm input contains non-finite entries")
    return float(np.sum(a * a))


@dataclass(frozen=True)
class SmoothnessProfile:
    """Certified constants of a finite-sum problem.

    L      : every component gradient is L-Lipschitz.
    tau    : every component is tau-weakly convex (f_i + tau/2 |x|^2 convex),
             with 0 <= tau <= L; tau = 0 means the components are convex.
    mu     : optional gradient-dominance constant of the average,
             |grad f(x)|^2 >= 2 mu (f(x) - f_star).
    f_star : optional infimum of the average.
    """

    L: float
    tau: float
    mu: float | None = None
    f_star: float | None = None

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L <= 0:
            raise ValueError(f"L must be positive and finite, got {self.L}")
        if not np.isfinite(self.tau) or self.tau < 0:
            raise ValueError(f"tau must be nonnegative and finite, got {self.tau}")
        if self.tau > self.L:
            raise ValueError(f"tau must not exceed L, got tau={self.tau} > L={self.L}")
        if self.mu is not None:
            if not np.isfinite(self.mu) or self.mu <= 0:
                raise ValueError(f"mu must be positive and finite, got {self.mu}")
            if self.mu > self.L:
                raise ValueError(f"mu must not exceed L, got mu={self.mu} > L={self.L}")
        if self.f_star is not None and not np.isfinite(self.f_star):
            raise ValueError("f_star must be finite when present")

    def kappa(self) -> float:
        """Condition-style ratio L/mu."""
        if self.mu is None:
            raise ValueError("kappa undefined: profile has no mu")
        return self.L / self.mu

    def require_f_star(self) -> float:
        if self.f_star is None:
            raise ValueError("f_star required but not certified for this problem")
        return self.f_star

    def with_mu(self, mu: float | None) -> "SmoothnessProfile":
        return dataclasses.replace(self, mu=mu)


@dataclass
class CallMeter:
    """Counter for gradient work done by verification, kept apart from the
    estimator's own accounting."""

    verification_grad_calls: int = 0

    def add(self, calls: int) -> None:
        self.verification_grad_calls += int(calls)


class FiniteSumProblem:
    """Oracle bundle for f = (1/n) sum_i f_i with certified constants.

    Subclasses implement the batched oracles (R query points at once); the
    scalar forms delegate to single-row batches so both access paths share
    one code path bit for bit.  Instances hold only frozen arrays after
    construction and are safe to share across threads.
    """

    def __init__(self, n: int, d: int, profile: SmoothnessProfile):
        if n < 1:
            raise ValueError(f"n must be at least 1, got {n}")
        if d < 1:
            raise ValueError(f"d must be at least 1, got {d}")
        self.n = int(n)
        self.d = int(d)
        self.profile = profile

    # -- scalar oracles ----------------------------------------------------

    def value(self, x) -> float:
        """Average objective f(x)."""
        x = self._check_point(x)
        return float(self.batch_value(x[None, :])[0])

    def full_gradient(self, x) -> np.ndarray:
        """Gradient of the average, (1/n) sum_i grad f_i(x)."""
        x = self._check_point(x)
        return freeze(self.batch_full_gradient(x[None, :])[0])

    def component_gradient(self, i: int, x) -> np.ndarray:
        """Gradient of component i at x, with i in [0, n)."""
        i = int(i)
        if not 0 <= i < self.n:
            raise DimensionMismatchError(
                f"component index {i} out of range [0, {self.n})"
            )
        x = self._check_point(x)
        idx = np.array([i], dtype=np.int64)
        return freeze(self.batch_component_gradient(idx, x[None, :])[0])

    # -- batched oracles (primitives, R rows at once) -----------------------

    def batch_value(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def batch_full_gradient(self, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def batch_component_gradient(self, indices: np.ndarray, X: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    # -- misc ---------------------------------------------------------------

    def describe(self) -> str:
        """Self-describing JSON text: family, generation inputs and the
        certified constants, enough to regenerate the instance."""
        return json.dumps(self._describe_dict(), sort_keys=True)

    def _describe_dict(self) -> dict:
        p = self.profile
        spec = getattr(self, "spec", None)
        return {
            "family": spec.family if spec is not None else type(self).__name__,
            "n": self.n,
            "d": self.d,
            "certified": {
                "L": p.L,
                "tau": p.tau,
                "mu": p.mu,
                "f_star": p.f_star,
            },
        }

    def _check_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.ndim != 1 or x.shape[0] != self.d:
            raise DimensionMismatchError(
                f"point has shape {x.shape}, expected ({self.d},)"
            )
        if not np.all(np.isfinite(x)):
            raise NonFiniteError("query point contains non-finite entries")
        return x


class OracleProblem(FiniteSumProblem):
    """Finite-sum problem built from caller-supplied scalar oracles.

    Used for hand-constructed instances in tests and as an escape hatch for
    objectives without a generator.  Batched oracles loop over rows, so they
    agree with the scalar forms by construction.
    """

    def __init__(self, n, d, profile, component_gradient_fn, value_fn,
                 full_gradient_fn=None):
        super().__init__(n, d, profile)
        self._component_gradient_fn = component_gradient_fn
        self._value_fn = value_fn
        self._full_gradient_fn = full_gradient_fn

    def value(self, x) -> float:
        x = self._check_point(x)
        v = float(self._value_fn(x))
        if not np.isfinite(v):
            raise NonFiniteError("objective value is non-finite")
        return v

    def full_gradient(self, x) -> np.ndarray:
        x = self._check_point(x)
        if self._full_gradient_fn is not None:
            g = as_vector(self._full_gradient_fn(x), self.d, "full gradient")
        else:
            g = mean_gradient(self, x)
        return g

    def component_gradient(self, i: int, x) -> np.ndarray:
        i = int(i)
        if not 0 <= i < self.n:
            raise DimensionMismatchError(
                f"component index {i} out of range [0, {self.n})"
            )
        x = self._check_point(x)
        g = as_vector(self._component_gradient_fn(i, x), self.d,
                      f"component {i} gradient")
        return g

    def batch_value(self, X):
        return np.array([self.value(row) for row in X])

    def batch_full_gradient(self, X):
        return np.stack([self.full_gradient(row) for row in X])

    def batch_component_gradient(self, indices, X):
        return np.stack([
            self.component_gradient(int(i), row) for i, row in zip(indices, X)
        ])


def mean_gradient(problem: FiniteSumProblem, x) -> np.ndarray:
    """Brute-force mean of the component gradients, (1/n) sum_i grad f_i(x).

    Accumulates in fixed index order and names the offending component if a
    gradient comes back non-finite.  This is the reference the closed-form
    full_gradient implementations are tested against.
    """
    acc = np.zeros(problem.d, dtype=np.float64)
    for i in range(problem.n):
        gi = problem.component_gradient(i, x)
        if not np.all(np.isfinite(gi)):
            raise NonFiniteError(f"component {i} gradient is non-finite")
        acc += gi
    return freeze(acc / problem.n)
