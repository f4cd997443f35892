"""Seeded finite-sum optimization lab around a coin-flip gradient estimator
with verifiable rate theory."""

from .analysis import (
    average_grad_norm,
    finite_difference_gradient,
    fit_linear_rate,
    gradient_suboptimality_slack,
    interpolated_cocoercivity_slack,
    shifted_monotonicity_slack,
)
from .core import (
    CallMeter,
    DimensionMismatchError,
    FiniteSumProblem,
    NonFiniteError,
    OracleProblem,
    SmoothnessProfile,
    mean_gradient,
    squared_norm,
)
from .estimator import (
    DivergenceError,
    PageConfig,
    PageState,
    TrajectoryRecord,
    apply_update,
    expected_grad_calls_per_iter,
    init,
    run,
    step,
)
from .lyapunov import (
    EnumerationGuardError,
    LyapunovValue,
    check_linear_contraction,
    check_sublinear_descent,
    evaluate,
    exact_conditional_expectation,
    exact_expectation_rollout,
)
from .problems import (
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
from .replicated import ReplicatedResult, run_replicates
from .schedule import (
    LyapunovCoefficients,
    RateMode,
    RatePrediction,
    ScheduleError,
    coefficients,
    contraction_factor,
    gamma_max_linear,
    gamma_max_sublinear,
    gradient_complexity_linear,
    iteration_complexity_linear,
    predict_linear,
    resolve_gamma,
    sublinear_bound,
    validate_stepsize,
)

__version__ = "0.1.0"
