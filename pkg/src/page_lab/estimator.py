"""Single-loop stochastic gradient method with coin-flip full refreshes.

One iteration from state (x, g):

    x' = x - gamma * g
    draw theta ~ Bernoulli(p)
    heads (theta = 1): g' = grad f(x')                       [n component calls]
    tails (theta = 0): draw i uniform on [0, n) and set
                       g' = g + grad f_i(x') - grad f_i(x)   [2 component calls]

so the mean per-iteration cost is p n + 2 (1 - p) component gradients.  With
p = 1, or n = 1 together with a full-gradient start, every step is plain
gradient descent.

Randomness contract: each iteration consumes exactly two uniforms from the
state's counter-based stream, coin first, then index; the index draw is
consumed (and ignored) on heads steps too, so lockstep replays over
pregenerated blocks stay aligned with sequential stepping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    FiniteSumProblem,
    NonFiniteError,
    as_vector,
    freeze,
)

G0_FULL = "full_gradient"
G0_ZERO = "zero"
G0_EXPLICIT = "explicit"
G0_MODES = (G0_FULL, G0_ZERO, G0_EXPLICIT)


class DivergenceError(RuntimeError):
    """Iterates left the finite range; carries the failing iteration."""

    def __init__(self, t: int, gamma: float):
        super().__init__(
            f"non-finite iterate at t={t} (gamma={gamma}); "
            f"the stepsize is too large for this problem"
        )
        self.t = t
        self.gamma = gamma


@dataclass(frozen=True)
class PageConfig:
    """Run parameters: stepsize, coin probability, start rule and seed."""

    gamma: float
    p: float
    g0_mode: str = G0_FULL
    g0: np.ndarray | None = None
    seed: int = 0

    def __post_init__(self):
        if not np.isfinite(self.gamma) or self.gamma <= 0:
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if not (0.0 < self.p <= 1.0):
            raise ValueError(f"p must satisfy 0 < p <= 1, got {self.p}")
        if self.g0_mode not in G0_MODES:
            raise ValueError(
                f"g0_mode must be one of {G0_MODES}, got {self.g0_mode!r}"
            )
        if self.g0_mode == G0_EXPLICIT:
            if self.g0 is None:
                raise ValueError("g0_mode 'explicit' requires a g0 vector")
            object.__setattr__(self, "g0", as_vector(self.g0, name="g0"))
        elif self.g0 is not None:
            raise ValueError(f"g0 vector given but g0_mode is {self.g0_mode!r}")
        if int(self.seed) != self.seed or self.seed < 0:
            raise ValueError(f"seed must be a nonnegative integer, got {self.seed}")


@dataclass
class PageState:
    """Iterate snapshot: (t, x, g, cumulative component-gradient calls).

    x and g are frozen arrays.  The stream object is shared along a
    trajectory and advances as steps are taken; snapshots are not replay
    points, re-running from t = 0 with the same seed is.
    """

    t: int
    x: np.ndarray
    g: np.ndarray
    grad_calls: int
    rng: np.random.Generator


def make_stream(seed: int) -> np.random.Generator:
    """Counter-based stream for one trajectory; distinct seeds are
    independent keys."""
    return np.random.Generator(np.random.Philox(key=int(seed)))


def init(problem: FiniteSumProblem, x0, config: PageConfig) -> PageState:
    """State at t = 0.

    The start estimate is grad f(x0) (n calls), the zero vector (0 calls) or
    the explicit vector from the config (0 calls).  No randomness is
    consumed."""
    x0 = as_vector(x0, problem.d, "x0")
    if config.g0_mode == G0_FULL:
        g = problem.full_gradient(x0)
        calls = problem.n
    elif config.g0_mode == G0_ZERO:
        g = freeze(np.zeros(problem.d))
        calls = 0
    else:
        g = as_vector(config.g0, problem.d, "g0")
        calls = 0
    return PageState(t=0, x=x0, g=g, grad_calls=calls,
                     rng=make_stream(config.seed))


def draw_outcome(rng: np.random.Generator, p: float, n: int) -> tuple[int, int]:
    """Consume one (coin, index) pair: theta = 1 iff u0 < p, index from u1.

    min() guards the index against u1 * n rounding up to n."""
    u = rng.random(2)
    theta = 1 if u[0] < p else 0
    index = min(int(u[1] * n), n - 1)
    return theta, index


def apply_update(state: PageState, problem: FiniteSumProblem, gamma: float,
                 theta: int, index: int) -> PageState:
    """One transition with the coin and index fixed by the caller.

    This is the production update rule; the exact-expectation checkers damage
    nothing by driving it directly since the input state is not mutated and
    no randomness is consumed."""
    if theta not in (0, 1):
        raise ValueError(f"theta must be 0 or 1, got {theta}")
    if not 0 <= index < problem.n:
        raise ValueError(f"index {index} out of range [0, {problem.n})")
    # overflow is detected by the finiteness checks, not by warnings
    with np.errstate(over="ignore", invalid="ignore", under="ignore"):
        x1 = state.x - gamma * state.g
        if not np.all(np.isfinite(x1)):
            raise DivergenceError(state.t, gamma)
        if theta:
            g1 = problem.full_gradient(x1)
            calls = problem.n
        else:
            g1 = state.g + (problem.component_gradient(index, x1)
                            - problem.component_gradient(index, state.x))
            calls = 2
    if not np.all(np.isfinite(g1)):
        raise DivergenceError(state.t, gamma)
    return PageState(t=state.t + 1, x=freeze(x1), g=freeze(np.asarray(g1)),
                     grad_calls=state.grad_calls + calls, rng=state.rng)


def step(state: PageState, problem: FiniteSumProblem,
         config: PageConfig) -> PageState:
    """One full iteration: draw (coin, index) from the state's stream, then
    apply the transition."""
    theta, index = draw_outcome(state.rng, config.p, problem.n)
    return apply_update(state, problem, config.gamma, theta, index)


@dataclass(frozen=True)
class TrajectoryRecord:
    """Per-iteration measurements; psi is None when no potential was asked
    for.  grad_calls counts only the estimator's own oracle work."""

    t: int
    f_gap: float
    grad_norm_sq: float
    g_norm_sq: float
    psi: float | None
    grad_calls: int


def run(problem: FiniteSumProblem, x0, config: PageConfig, T: int,
        psi_fn=None, recorder=None) -> list[TrajectoryRecord]:
    """Run T iterations, recording t = 0..T inclusive.

    psi_fn, when given, maps (x, g, f_gap, grad_fx) to the potential value
    stored on each record.  recorder, when given, is called with each record
    as it is produced.  Recording work (one value and one full gradient per
    record) is not charged to the estimator's call counter.  Divergence
    propagates as DivergenceError with the failing t.
    """
    if T < 0:
        raise ValueError(f"T must be nonnegative, got {T}")
    f_star = problem.profile.require_f_star()
    state = init(problem, x0, config)
    records = []

    def record(s: PageState):
        # measurements may overflow on a diverging trajectory; record them
        # as-is and let the transition raise
        with np.errstate(over="ignore", invalid="ignore", under="ignore"):
            gf = problem.full_gradient(s.x)
            f_gap = problem.value(s.x) - f_star
            psi = None if psi_fn is None else float(psi_fn(s.x, s.g, f_gap, gf))
            rec = TrajectoryRecord(
                t=s.t,
                f_gap=float(f_gap),
                grad_norm_sq=float(np.sum(gf * gf)),
                g_norm_sq=float(np.sum(s.g * s.g)),
                psi=psi,
                grad_calls=s.grad_calls,
            )
        records.append(rec)
        if recorder is not None:
            recorder(rec)

    record(state)
    for _ in range(T):
        state = step(state, problem, config)
        record(state)
    return records


def expected_grad_calls_per_iter(config, n: int) -> float:
    """Mean component-gradient calls per iteration, p n + 2 (1 - p)."""
    p = config.p if isinstance(config, PageConfig) else float(config)
    if not (0.0 < p <= 1.0):
        raise ValueError(f"p must satisfy 0 < p <= 1, got {p}")
    if n < 1:
        raise ValueError(f"n must be at least 1, got {n}")
    return p * n + 2.0 * (1.0 - p)
