"""Config parsing, the experiment runner's artifacts, sweep execution, and
CLI exit codes."""

import csv
import json
import os

import numpy as np
import pytest

from page_lab.estimator import PageConfig
from page_lab.harness import sweep as sweep_mod
from page_lab.harness.cli import main
from page_lab.harness.config import (
    ConfigError,
    default_stride,
    load_experiment,
    load_sweep,
    resolve,
)
from page_lab.harness.runner import (
    CSV_HEADER,
    execute_run,
    write_trajectory_csv,
)
from page_lab.harness.sweep import execute_sweep, worker_count
from page_lab.problems import ProblemSpec, interpolated_quadratic
from page_lab.replicated import run_replicates

BASE_TOML = """
[problem]
family = "interpolated_quadratic"
n = 6
d = 3
L = 2.0
tau = 1.0
mu = 0.2
seed = 5

[algorithm]
p = 0.25
seed = 9

[run]
horizon = 40
repetitions = 3
mode = "linear"

[x0]
kind = "gaussian"
scale = 1.0
seed = 2
"""


def write_config(tmp_path, body, name="exp.toml", outputs=True):
    path = tmp_path / name
    text = body
    if outputs:
        text += f"""
[output]
csv = "{tmp_path}/out.csv"
summary = "{tmp_path}/out.json"
svg = "{tmp_path}/out.svg"
"""
    path.write_text(text, encoding="utf-8")
    return str(path)


def test_load_and_resolve_defaults(tmp_path):
    cfg = load_experiment(write_config(tmp_path, BASE_TOML))
    assert cfg.problem.family == "interpolated_quadratic"
    assert cfg.repetitions == 3
    resolved = resolve(cfg)
    # default stepsize is eta * gamma_max for the run mode with eta = 0.9
    from page_lab.schedule import gamma_max_linear

    assert resolved.gamma == pytest.approx(
        0.9 * gamma_max_linear(resolved.problem.profile, 0.25))
    assert resolved.page_config.p == 0.25
    assert resolved.record_stride == 1  # horizon 40 is small
    assert default_stride(40) == 1
    assert default_stride(200000) == 10


def test_unknown_keys_are_named(tmp_path):
    bad = BASE_TOML.replace("[run]", "[run]\nhorizont = 3")
    with pytest.raises(ConfigError, match="horizont"):
        load_experiment(write_config(tmp_path, bad))
    bad2 = BASE_TOML + "\n[outputs]\ncsv = 'x'\n"
    with pytest.raises(ConfigError, match="outputs"):
        load_experiment(write_config(tmp_path, bad2, outputs=False))


def test_missing_required_keys(tmp_path):
    with pytest.raises(ConfigError, match="horizon"):
        load_experiment(write_config(
            tmp_path, BASE_TOML.replace("horizon = 40", "")))
    with pytest.raises(ConfigError, match="[pP]\\b|p "):
        load_experiment(write_config(
            tmp_path, BASE_TOML.replace("p = 0.25", "")))


def test_explicit_stepsize_is_validated_against_mode(tmp_path):
    body = BASE_TOML.replace('tau = 1.0', 'tau = 0.0')
    body = body.replace("[algorithm]", "[algorithm]\nstepsize = 0.5")
    cfg = load_experiment(write_config(tmp_path, body))
    with pytest.raises(ConfigError, match="tau = 0"):
        resolve(cfg)  # gamma = 1/L needs strict inequality when tau = 0


def test_explicit_x0_must_match_dimension(tmp_path):
    body = BASE_TOML.replace(
        'kind = "gaussian"', 'kind = "explicit"\nvalues = [1.0, 2.0]')
    cfg = load_experiment(write_config(tmp_path, body))
    with pytest.raises(ConfigError):
        resolve(cfg)


def test_linear_mode_requires_mu(tmp_path):
    # the quadratic generator supplies a default mu, so use logistic, which
    # certifies none
    body = """
[problem]
family = "logistic"
n = 4
d = 2
L = 1.0
seed = 3

[algorithm]
p = 0.5

[run]
horizon = 10
mode = "linear"

[x0]
kind = "ones"
"""
    cfg = load_experiment(write_config(tmp_path, body))
    with pytest.raises(ConfigError, match="mu"):
        resolve(cfg)
    sub = load_experiment(write_config(
        tmp_path, body.replace('mode = "linear"', 'mode = "sublinear"'),
        name="sub.toml"))
    resolve(sub)


def test_g0_forms(tmp_path):
    body = BASE_TOML.replace("[algorithm]", '[algorithm]\ng0 = "zero"')
    cfg = load_experiment(write_config(tmp_path, body))
    assert resolve(cfg).page_config.g0_mode == "zero"
    body = BASE_TOML.replace("[algorithm]",
                             "[algorithm]\ng0 = [0.1, 0.2, 0.3]")
    cfg = load_experiment(write_config(tmp_path, body))
    rp = resolve(cfg).page_config
    assert rp.g0_mode == "explicit"
    np.testing.assert_array_equal(rp.g0, [0.1, 0.2, 0.3])
    body = BASE_TOML.replace("[algorithm]", '[algorithm]\ng0 = "sideways"')
    with pytest.raises(ConfigError):
        load_experiment(write_config(tmp_path, body))


def test_execute_run_writes_consistent_artifacts(tmp_path):
    cfg = load_experiment(write_config(tmp_path, BASE_TOML))
    result = execute_run(cfg)
    csv_path = tmp_path / "out.csv"
    json_path = tmp_path / "out.json"
    svg_path = tmp_path / "out.svg"
    assert csv_path.exists() and json_path.exists() and svg_path.exists()

    lines = csv_path.read_text(encoding="utf-8").splitlines()
    assert lines[0] == CSV_HEADER
    assert len(lines) == 1 + 41 * 3  # header + (horizon + 1) * repetitions

    with open(csv_path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert {row["replicate"] for row in rows} == {"0", "1", "2"}
    first = rows[0]
    assert first["t"] == "0"
    assert float(first["psi"]) == result.replicated.psi0

    summary = json.loads(json_path.read_text(encoding="utf-8"))
    assert summary["run"]["horizon"] == 40
    assert summary["problem"]["family"] == "interpolated_quadratic"
    assert summary["rates"]["theoretical_rho"] is not None
    assert summary["algorithm"]["expected_grad_calls_per_iter"] == \
        pytest.approx(0.25 * 6 + 2 * 0.75)
    assert svg_path.read_text(encoding="utf-8").lstrip().startswith("<svg")


def test_reruns_are_byte_identical(tmp_path):
    cfg_path = write_config(tmp_path, BASE_TOML)
    execute_run(load_experiment(cfg_path))
    blobs = [(tmp_path / name).read_bytes()
             for name in ("out.csv", "out.json", "out.svg")]
    execute_run(load_experiment(cfg_path))
    for name, before in zip(("out.csv", "out.json", "out.svg"), blobs):
        assert (tmp_path / name).read_bytes() == before


def test_trajectory_csv_marks_diverged_replicates(tmp_path):
    prob = interpolated_quadratic(ProblemSpec(
        family="interpolated_quadratic", n=4, d=2, target_L=2.0,
        target_tau=2.0, target_mu=0.5, seed=3))
    cfg = PageConfig(gamma=1e6, p=0.25, seed=11)
    res = run_replicates(prob, np.array([1.0, -1.0]), cfg, 51, None, 8,
                         record_stride=5)
    path = tmp_path / "div.csv"
    write_trajectory_csv(str(path), res)
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    dead = [r for r in rows if r["replicate"] == "2" and r["t"] == "51"]
    assert len(dead) == 1
    assert dead[0]["f_gap"] == "nan" and dead[0]["grad_calls"] == "0"
    alive = [r for r in rows if r["replicate"] == "0" and r["t"] == "51"]
    assert len(alive) == 1 and alive[0]["grad_calls"] != "0"


SWEEP_TOML = """
[base.problem]
family = "interpolated_quadratic"
n = 8
d = 3
L = 2.0
tau = 0.5
mu = 0.1
seed = 5

[base.algorithm]
p = 0.25
seed = 9

[base.run]
horizon = 10
mode = "linear"

[base.x0]
kind = "gaussian"
seed = 2

[axes]
tau = [0.0, 1.0]

[sweep]
target = "psi"
epsilon_rel = 1e-3
cap = 4000
"""


def test_sweep_runs_grid_in_order(tmp_path):
    body = SWEEP_TOML + f"""
[output]
csv = "{tmp_path}/sweep.csv"
svg = "{tmp_path}/sweep.svg"
"""
    path = tmp_path / "sweep.toml"
    path.write_text(body, encoding="utf-8")
    sw = load_sweep(str(path))
    assert sw.axes == (("tau", (0.0, 1.0)),)
    result = execute_sweep(sw)
    assert [pt.values for pt in result.points] == [(0.0,), (1.0,)]
    assert all(pt.status == "ok" for pt in result.points)
    assert result.points[0].iterations <= result.points[1].iterations

    lines = (tmp_path / "sweep.csv").read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("tau,status,iterations,mean_grad_calls")
    assert len(lines) == 3
    assert (tmp_path / "sweep.svg").exists()


def test_sweep_marks_invalid_points(tmp_path):
    body = SWEEP_TOML.replace("tau = [0.0, 1.0]",
                              "kappa = [20.0, 0.5]")
    path = tmp_path / "sweep.toml"
    path.write_text(body, encoding="utf-8")
    result = execute_sweep(load_sweep(str(path)))
    statuses = [pt.status for pt in result.points]
    assert statuses[0] == "ok"
    assert statuses[1] == "invalid"
    assert result.points[1].reason
    assert not result.all_invalid


def test_sweep_is_deterministic_across_worker_counts(tmp_path, monkeypatch):
    outs = []
    for workers in ("1", "3"):
        monkeypatch.setenv("PAGE_LAB_THREADS", workers)
        body = SWEEP_TOML + f"""
[output]
csv = "{tmp_path}/sweep-{workers}.csv"
"""
        path = tmp_path / f"sweep-{workers}.toml"
        path.write_text(body, encoding="utf-8")
        execute_sweep(load_sweep(str(path)))
        outs.append((tmp_path / f"sweep-{workers}.csv").read_bytes())
    assert outs[0] == outs[1]


def test_worker_count_env(monkeypatch):
    monkeypatch.setenv("PAGE_LAB_THREADS", "7")
    assert worker_count() == 7
    monkeypatch.setenv("PAGE_LAB_THREADS", "zero")
    with pytest.raises(ConfigError, match="PAGE_LAB_THREADS"):
        worker_count()
    monkeypatch.setenv("PAGE_LAB_THREADS", "0")
    with pytest.raises(ConfigError):
        worker_count()
    monkeypatch.delenv("PAGE_LAB_THREADS")
    assert worker_count() >= 1


def test_cli_run_success_and_outputs(tmp_path, capsys):
    cfg_path = write_config(tmp_path, BASE_TOML)
    assert main(["run", cfg_path]) == 0
    out = capsys.readouterr().out
    assert "wrote" in out
    assert (tmp_path / "out.csv").exists()


def test_cli_validation_failures_exit_one(tmp_path, capsys):
    bad = write_config(tmp_path, BASE_TOML.replace("horizon = 40", ""))
    assert main(["run", bad]) == 1
    assert "horizon" in capsys.readouterr().err

    not_toml = tmp_path / "broken.toml"
    not_toml.write_text("[problem\n", encoding="utf-8")
    assert main(["run", str(not_toml)]) == 1

    assert main(["verify", "nonsense"]) == 1
    assert main(["frobnicate"]) == 1


def test_cli_missing_file_exits_two(tmp_path):
    assert main(["run", str(tmp_path / "absent.toml")]) == 2


def test_cli_unwritable_output_exits_two(tmp_path, capsys):
    body = BASE_TOML + """
[output]
csv = "/proc/page-lab-denied/out.csv"
"""
    cfg_path = write_config(tmp_path, body, outputs=False)
    assert main(["run", cfg_path]) == 2


def test_cli_verify_suite_passes(capsys):
    assert main(["verify", "lemmas", "--seed", "11"]) == 0
    out = capsys.readouterr().out
    assert "suite lemmas" in out and "[PASS]" in out


def test_cli_rate_reproduces_fit(tmp_path, capsys):
    cfg_path = write_config(tmp_path, BASE_TOML)
    assert main(["run", cfg_path]) == 0
    run_out = capsys.readouterr().out
    assert main(["rate", str(tmp_path / "out.csv")]) == 0
    rate_out = capsys.readouterr().out
    assert "fitted per-iteration decay factor" in rate_out
    # the summary JSON records the same fit
    summary = json.loads((tmp_path / "out.json").read_text(encoding="utf-8"))
    fitted = summary["rates"]["fitted_rho"]
    assert f"{fitted:.12g}" in rate_out
    assert run_out  # the run printed its own report


def test_cli_rate_rejects_foreign_csv(tmp_path):
    alien = tmp_path / "alien.csv"
    alien.write_text("a,b\n1,2\n", encoding="utf-8")
    assert main(["rate", str(alien)]) == 1
    assert main(["rate", str(tmp_path / "missing.csv")]) == 2


def test_cli_sweep_runs(tmp_path, capsys):
    body = SWEEP_TOML + f"""
[output]
csv = "{tmp_path}/s.csv"
"""
    path = tmp_path / "s.toml"
    path.write_text(body, encoding="utf-8")
    assert main(["sweep", str(path)]) == 0
    out = capsys.readouterr().out
    assert "tau=0" in out or "tau = 0" in out or "ok" in out
    assert (tmp_path / "s.csv").exists()
