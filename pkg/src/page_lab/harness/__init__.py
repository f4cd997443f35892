"""Experiment harness: TOML configs, runs, sweeps, verification suites and
the page-lab command line."""

from .config import ConfigError, ExperimentConfig, SweepConfig, load_experiment, load_sweep
from .runner import RunResult, execute_run
from .sweep import SweepResult, execute_sweep
from .verify import SUITES, SuiteResult, run_suite
