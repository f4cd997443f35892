"""TOML experiment configs: strict parsing and resolution to run objects.

An experiment file has sections [problem], [algorithm], [run], [x0] and
[output]; a sweep file nests a full experiment under [base] and adds [axes],
[sweep] and its own [output].  Unknown keys anywhere are rejected, so typos
fail loudly instead of silently running defaults.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # python 3.10
    import tomli as tomllib

from .. import schedule
from ..core import as_vector
from ..estimator import G0_EXPLICIT, G0_FULL, G0_ZERO, PageConfig, make_stream
from ..problems import FAMILIES, ProblemSpec, generate
from ..schedule import RateMode

STEPSIZE_RULES = ("eta_times_max_linear", "eta_times_max_sublinear")
X0_KINDS = ("gaussian", "ones", "explicit")
SWEEP_AXES = ("tau", "p", "n", "kappa", "gamma", "seed")
SWEEP_TARGETS = ("psi", "grad_norm")


class ConfigError(ValueError):
    """A config file is malformed or asks for an inadmissible run."""


def _check_keys(section: dict, allowed, where: str) -> None:
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown key(s) {unknown} in [{where}]")


def _req(section: dict, key: str, where: str):
    if key not in section:
        raise ConfigError(f"missing required key {key!r} in [{where}]")
    return section[key]


def _as_float(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where} must be a number, got {v!r}")
    f = float(v)
    if not math.isfinite(f):
        raise ConfigError(f"{where} must be finite, got {v!r}")
    return f


def _as_int(v, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{where} must be an integer, got {v!r}")
    return v


@dataclass(frozen=True)
class ExperimentConfig:
    """Parsed experiment file, prior to generation and admissibility checks."""

    problem: ProblemSpec
    p: float
    stepsize: float | str
    eta: float
    g0_mode: str
    g0_values: tuple | None
    algo_seed: int
    horizon: int
    repetitions: int
    record_stride: int | None
    mode: RateMode
    x0_kind: str
    x0_scale: float
    x0_seed: int
    x0_values: tuple | None
    csv_path: str | None
    summary_path: str | None
    svg_path: str | None


def _parse_problem(sec: dict) -> ProblemSpec:
    _check_keys(sec, ("family", "n", "d", "L", "tau", "mu", "seed", "curvatures"),
                "problem")
    family = _req(sec, "family", "problem")
    if family not in FAMILIES:
        raise ConfigError(f"problem.family must be one of {FAMILIES}, got {family!r}")
    curv = sec.get("curvatures", [])
    if curv and not (isinstance(curv, list) and all(isinstance(r, list) for r in curv)):
        raise ConfigError("problem.curvatures must be a list of rows")
    try:
        return ProblemSpec(
            family=family,
            n=_as_int(sec.get("n", 1), "problem.n"),
            d=_as_int(sec.get("d", 1), "problem.d"),
            target_L=_as_float(sec.get("L", 1.0), "problem.L"),
            target_tau=_as_float(sec.get("tau", 0.0), "problem.tau"),
            target_mu=(None if sec.get("mu") is None
                       else _as_float(sec["mu"], "problem.mu")),
            seed=_as_int(sec.get("seed", 0), "problem.seed"),
            curvatures=tuple(tuple(_as_float(v, "problem.curvatures") for v in row)
                             for row in curv),
        )
    except ValueError as e:
        raise ConfigError(str(e)) from e


def _parse_experiment(raw: dict, where: str = "") -> ExperimentConfig:
    prefix = where + "." if where else ""
    _check_keys(raw, ("problem", "algorithm", "run", "x0", "output"),
                where or "top level")
    if "problem" not in raw or "algorithm" not in raw or "run" not in raw:
        raise ConfigError(
            f"[{prefix}problem], [{prefix}algorithm] and [{prefix}run] are required"
        )
    spec = _parse_problem(raw["problem"])

    alg = raw["algorithm"]
    _check_keys(alg, ("p", "stepsize", "eta", "g0", "seed"), prefix + "algorithm")
    p = _as_float(_req(alg, "p", prefix + "algorithm"), "algorithm.p")
    eta = _as_float(alg.get("eta", 0.9), "algorithm.eta")
    run_sec = raw["run"]
    _check_keys(run_sec, ("horizon", "repetitions", "record_stride", "mode"),
                prefix + "run")
    try:
        mode = RateMode(run_sec.get("mode", "linear"))
    except ValueError:
        raise ConfigError(
            f"run.mode must be 'linear' or 'sublinear', got {run_sec.get('mode')!r}"
        ) from None
    stepsize = alg.get("stepsize", f"eta_times_max_{mode.value}")
    if isinstance(stepsize, str):
        if stepsize not in STEPSIZE_RULES:
            raise ConfigError(
                f"algorithm.stepsize must be a number or one of {STEPSIZE_RULES}, "
                f"got {stepsize!r}"
            )
    else:
        stepsize = _as_float(stepsize, "algorithm.stepsize")
    g0 = alg.get("g0", G0_FULL)
    g0_values = None
    if isinstance(g0, list):
        g0_values = tuple(_as_float(v, "algorithm.g0") for v in g0)
        g0_mode = G0_EXPLICIT
    elif g0 in (G0_FULL, G0_ZERO):
        g0_mode = g0
    else:
        raise ConfigError(
            f"algorithm.g0 must be 'full_gradient', 'zero' or a vector, got {g0!r}"
        )
    algo_seed = _as_int(alg.get("seed", 0), "algorithm.seed")

    horizon = _as_int(_req(run_sec, "horizon", prefix + "run"), "run.horizon")
    if horizon < 0:
        raise ConfigError(f"run.horizon must be nonnegative, got {horizon}")
    reps = _as_int(run_sec.get("repetitions", 1), "run.repetitions")
    if reps < 1:
        raise ConfigError(f"run.repetitions must be positive, got {reps}")
    stride = run_sec.get("record_stride")
    if stride is not None:
        stride = _as_int(stride, "run.record_stride")
        if stride < 1:
            raise ConfigError(f"run.record_stride must be positive, got {stride}")

    x0_sec = raw.get("x0", {})
    _check_keys(x0_sec, ("kind", "scale", "seed", "values"), prefix + "x0")
    x0_kind = x0_sec.get("kind", "gaussian")
    if x0_kind not in X0_KINDS:
        raise ConfigError(f"x0.kind must be one of {X0_KINDS}, got {x0_kind!r}")
    x0_values = x0_sec.get("values")
    if x0_kind == "explicit":
        if not isinstance(x0_values, list):
            raise ConfigError("x0.kind 'explicit' requires x0.values")
        x0_values = tuple(_as_float(v, "x0.values") for v in x0_values)
    elif x0_values is not None:
        raise ConfigError(f"x0.values given but x0.kind is {x0_kind!r}")

    out = raw.get("output", {})
    _check_keys(out, ("csv", "summary", "svg"), prefix + "output")

    return ExperimentConfig(
        problem=spec,
        p=p,
        stepsize=stepsize,
        eta=eta,
        g0_mode=g0_mode,
        g0_values=g0_values,
        algo_seed=algo_seed,
        horizon=horizon,
        repetitions=reps,
        record_stride=stride,
        mode=mode,
        x0_kind=x0_kind,
        x0_scale=_as_float(x0_sec.get("scale", 1.0), "x0.scale"),
        x0_seed=_as_int(x0_sec.get("seed", 1), "x0.seed"),
        x0_values=x0_values,
        csv_path=out.get("csv"),
        summary_path=out.get("summary"),
        svg_path=out.get("svg"),
    )


def load_experiment(path: str) -> ExperimentConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    return _parse_experiment(raw)


@dataclass(frozen=True)
class SweepConfig:
    base: ExperimentConfig
    axes: tuple  # ((name, (values...)), ...) in declaration order
    target: str
    epsilon_rel: float
    epsilon_abs: float | None
    cap: int
    csv_path: str | None
    svg_path: str | None


def load_sweep(path: str) -> SweepConfig:
    with open(path, "rb") as fh:
        try:
            raw = tomllib.load(fh)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"cannot parse {path}: {e}") from e
    _check_keys(raw, ("base", "axes", "sweep", "output"), "top level")
    if "base" not in raw or "axes" not in raw:
        raise ConfigError("[base] and [axes] are required in a sweep config")
    base = _parse_experiment(raw["base"], where="base")

    axes_sec = raw["axes"]
    if not axes_sec:
        raise ConfigError("[axes] must name at least one axis")
    _check_keys(axes_sec, SWEEP_AXES, "axes")
    axes = []
    for name, values in axes_sec.items():
        if not isinstance(values, list) or not values:
            raise ConfigError(f"axes.{name} must be a nonempty list")
        if name in ("n", "seed"):
            vals = tuple(_as_int(v, f"axes.{name}") for v in values)
        else:
            vals = tuple(_as_float(v, f"axes.{name}") for v in values)
        axes.append((name, vals))

    sweep_sec = raw.get("sweep", {})
    _check_keys(sweep_sec, ("target", "epsilon_rel", "epsilon_abs", "cap"), "sweep")
    target = sweep_sec.get("target", "psi")
    if target not in SWEEP_TARGETS:
        raise ConfigError(f"sweep.target must be one of {SWEEP_TARGETS}, got {target!r}")
    eps_rel = _as_float(sweep_sec.get("epsilon_rel", 1e-8), "sweep.epsilon_rel")
    eps_abs = sweep_sec.get("epsilon_abs")
    if eps_abs is not None:
        eps_abs = _as_float(eps_abs, "sweep.epsilon_abs")
    if target == "grad_norm" and eps_abs is None:
        raise ConfigError("sweep.target 'grad_norm' requires sweep.epsilon_abs")
    if eps_rel <= 0 or (eps_abs is not None and eps_abs <= 0):
        raise ConfigError("sweep epsilons must be positive")
    cap = _as_int(sweep_sec.get("cap", 50000), "sweep.cap")
    if cap < 1:
        raise ConfigError(f"sweep.cap must be positive, got {cap}")

    out = raw.get("output", {})
    _check_keys(out, ("csv", "svg"), "output")
    return SweepConfig(
        base=base,
        axes=tuple(axes),
        target=target,
        epsilon_rel=eps_rel,
        epsilon_abs=eps_abs,
        cap=cap,
        csv_path=out.get("csv"),
        svg_path=out.get("svg"),
    )


@dataclass(frozen=True)
class ResolvedExperiment:
    """Everything a run needs: the generated instance and validated knobs."""

    config: ExperimentConfig
    problem: object
    x0: np.ndarray
    gamma: float
    coeffs: schedule.LyapunovCoefficients
    page_config: PageConfig
    record_stride: int


def initial_point(cfg: ExperimentConfig, d: int) -> np.ndarray:
    if cfg.x0_kind == "gaussian":
        return make_stream(cfg.x0_seed).normal(size=d) * cfg.x0_scale
    if cfg.x0_kind == "ones":
        return np.ones(d) * cfg.x0_scale
    return as_vector(x0_values_array(cfg), d, "x0.values")


def x0_values_array(cfg: ExperimentConfig) -> np.ndarray:
    return np.array(cfg.x0_values, dtype=np.float64)


def default_stride(horizon: int) -> int:
    # full resolution up to 1e4 iterations, decimated beyond
    return 1 if horizon <= 10_000 else 10


def resolve(cfg: ExperimentConfig) -> ResolvedExperiment:
    """Generate the instance, fix the stepsize and validate admissibility.

    Any violated precondition (stepsize bound, missing mu in linear mode,
    malformed vectors) surfaces as ConfigError naming the constraint."""
    try:
        problem = generate(cfg.problem)
        profile = problem.profile
        if isinstance(cfg.stepsize, str):
            rule_mode = (RateMode.LINEAR if cfg.stepsize.endswith("linear")
                         else RateMode.SUBLINEAR)
            gamma = schedule.resolve_gamma(profile, cfg.p, rule_mode, cfg.eta)
        else:
            gamma = cfg.stepsize
        schedule.validate_stepsize(gamma, profile, cfg.p, cfg.mode)
        coeffs = schedule.coefficients(gamma, profile, cfg.mode)
        if cfg.mode == RateMode.LINEAR and profile.mu is None:
            raise ConfigError(
                "run.mode 'linear' needs a gradient-dominance mu; this problem "
                "has none"
            )
        x0 = initial_point(cfg, problem.d)
        page_config = PageConfig(
            gamma=gamma, p=cfg.p, g0_mode=cfg.g0_mode,
            g0=(None if cfg.g0_values is None
                else np.array(cfg.g0_values, dtype=np.float64)),
            seed=cfg.algo_seed,
        )
        stride = (cfg.record_stride if cfg.record_stride is not None
                  else default_stride(cfg.horizon))
        return ResolvedExperiment(
            config=cfg, problem=problem, x0=x0, gamma=gamma, coeffs=coeffs,
            page_config=page_config, record_stride=stride,
        )
    except ConfigError:
        raise
    except ValueError as e:
        raise ConfigError(str(e)) from e
