import os
import textwrap

import numpy as np
import pandas as pd
import pytest
from scipy.integrate import trapezoid

from src.integration.command_registry import get_command, list_commands
from src.jitterpovm import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_MODEL, EXIT_OK, main

ORACLE = textwrap.dedent("""\
    run:
      command: oracle-check
      n_trials: 20000
      seed: 99
      bins: 200
      herald_window: 0.05
    detector:
      jitter: lognormal
      mean: 1.0
      std: 0.5
      efficiency: 0.8
    state:
      envelope: gaussian
      center: 0.0
      std: 0.2
    sweep:
      k: [1, 2]
    grid:
      t_min: -1.5
      t_max: 13.0
      dt: 0.005
      delay_half_width: 14.0
    """)


@pytest.fixture
def scenario(tmp_path):
    def write(text, name="scenario.yaml"):
        path = tmp_path / name
        path.write_text(text)
        return str(path)
    return write


def run_cli(command, config, out, *extra):
    return main([command, "--config", config, "--out", str(out), *extra])


def test_registry():
    assert list_commands() == ["density", "delay", "herald", "oracle-check"]
    assert get_command("oracle-check").is_oracle
    with pytest.raises(KeyError):
        get_command("plot")


def test_density_command(scenario_dir, tmp_path):
    out = tmp_path / "fig2.csv"
    assert run_cli("density", os.path.join(scenario_dir, "fig2_density.yaml"), out) == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["T", "p_on_k1", "p_on_k2", "p_on_k5"]
    for name in frame.columns[1:]:
        assert trapezoid(frame[name], frame["T"]) == pytest.approx(1.0, abs=1e-4)
    modes = [frame["T"][frame[name].idxmax()] for name in frame.columns[1:]]
    assert modes[0] > modes[1] > modes[2]


def test_delay_command(scenario_dir, tmp_path):
    out = tmp_path / "fig3.csv"
    assert run_cli("delay", os.path.join(scenario_dir, "fig3_delay.yaml"), out) == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["delta", "p_std0.25", "p_std0.5", "p_std1"]
    np.testing.assert_allclose(frame["delta"], -frame["delta"][::-1].to_numpy(), atol=1e-9)
    peaks = []
    for name in frame.columns[1:]:
        values = frame[name].to_numpy()
        np.testing.assert_allclose(values, values[::-1], rtol=0, atol=1e-9)
        peaks.append(values.max())
    assert peaks[0] > peaks[1] > peaks[2]


def test_herald_command(scenario_dir, tmp_path):
    out = tmp_path / "fig4.csv"
    assert run_cli("herald", os.path.join(scenario_dir, "fig4_herald.yaml"), out) == EXIT_OK
    frame = pd.read_csv(out)
    assert list(frame.columns) == ["t", "w_std0.25", "w_std0.5", "w_std1"]
    for name in frame.columns[1:]:
        assert trapezoid(frame[name], frame["t"]) == pytest.approx(1.0, abs=1e-6)
        assert (frame[name][frame["t"].abs() > 0.5 + 1e-9] == 0.0).all()


def test_malformed_config_writes_nothing(scenario, tmp_path):
    config = scenario("detector:\n  jitter: lognormal\n  efficency: 0.5\n")
    out = tmp_path / "out.csv"
    assert run_cli("density", config, out) == EXIT_CONFIG
    assert not out.exists()
    assert os.listdir(tmp_path) == ["scenario.yaml"]


def test_missing_config_file(tmp_path):
    assert run_cli("density", str(tmp_path / "absent.yaml"), tmp_path / "out.csv") == EXIT_CONFIG


def test_command_must_match_scenario(scenario_dir, tmp_path):
    out = tmp_path / "out.csv"
    assert run_cli("delay", os.path.join(scenario_dir, "fig2_density.yaml"), out) == EXIT_CONFIG
    assert not out.exists()


def test_short_grid_is_a_model_error(scenario_dir, scenario, tmp_path):
    with open(os.path.join(scenario_dir, "fig2_density.yaml")) as f:
        text = f.read().replace("t_max: 13.0", "t_max: 5.0")
    out = tmp_path / "out.csv"
    assert run_cli("density", scenario(text), out) == EXIT_MODEL
    assert not out.exists()


def test_bad_worker_count_from_environment(scenario_dir, tmp_path, monkeypatch):
    monkeypatch.setenv("JITTERPOVM_N_JOBS", "many")
    out = tmp_path / "out.csv"
    assert run_cli("density", os.path.join(scenario_dir, "fig2_density.yaml"), out) == EXIT_CONFIG


def test_missing_arguments_exit_through_argparse():
    with pytest.raises(SystemExit) as err:
        main(["density"])
    assert err.value.code == 2


def test_oracle_report_is_deterministic(scenario, tmp_path):
    config = scenario(ORACLE)
    serial, parallel = tmp_path / "serial.csv", tmp_path / "parallel.csv"
    assert run_cli("oracle-check", config, serial, "--n-jobs", "1") == EXIT_OK
    assert run_cli("oracle-check", config, parallel, "--n-jobs", "2") == EXIT_OK
    assert serial.read_bytes() == parallel.read_bytes()
    report = pd.read_csv(serial)
    assert list(report["check"]) == ["firing_k1", "no_click_k1", "firing_k2", "no_click_k2",
                                     "pair_delay", "both_click", "heralded"]
    assert list(report["seed"]) == [99, 99, 100, 100, 101, 101, 102]
    assert report["passed"].all()


def test_seed_override_changes_report(scenario, tmp_path):
    config = scenario(ORACLE)
    base, other = tmp_path / "base.csv", tmp_path / "other.csv"
    run_cli("oracle-check", config, base)
    run_cli("oracle-check", config, other, "--seed", "7")
    assert pd.read_csv(other)["seed"].iloc[0] == 7
    assert not pd.read_csv(base)["statistic"].equals(pd.read_csv(other)["statistic"])


def test_perturbed_simulator_fails_the_oracle(scenario, tmp_path):
    config = scenario(ORACLE.replace("  herald_window: 0.05\n", "  herald_window: 0.05\n  perturb_efficiency_b: 0.5\n"))
    out = tmp_path / "report.csv"
    assert run_cli("oracle-check", config, out) == EXIT_CHECK_FAILED
    report = pd.read_csv(out).set_index("check")
    assert not report.loc["both_click", "passed"]
    assert report.loc["firing_k1", "passed"]


def test_oracle_needs_enough_trials(scenario, tmp_path):
    out = tmp_path / "report.csv"
    assert run_cli("oracle-check", scenario(ORACLE), out, "--trials", "100") == EXIT_CONFIG
    assert not out.exists()
