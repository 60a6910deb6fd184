import os
import textwrap

import pytest

from src.analysis.distributions import LogNormal, Rectangular
from src.analysis.states import GaussianAmplitude, RectangularAmplitude, SimultaneousPairSampler
from src.data.scenario_config import ScenarioLoader, load_scenario
from src.exceptions import ConfigError

BASE = textwrap.dedent("""\
    detector:
      jitter: lognormal
      mean: 1.0
      std: 0.5
      efficiency: 0.8
    grid:
      t_min: 0.0
      t_max: 13.0
      dt: 0.005
    """)


def load(text):
    return ScenarioLoader().load_text(textwrap.dedent(text))


@pytest.mark.parametrize("name", ["fig2_density", "fig3_delay", "fig4_herald", "oracle_suite"])
def test_shipped_scenarios_load(scenario_dir, name):
    config = load_scenario(os.path.join(scenario_dir, f"{name}.yaml"))
    assert config.get("run", "command") in ("density", "delay", "herald", "oracle-check")


def test_fig2_scenario(scenario_dir):
    config = load_scenario(os.path.join(scenario_dir, "fig2_density.yaml"))
    assert [p.k for p in config.arrival_patterns()] == [1, 2, 5]
    grid = config.time_grid()
    assert grid.n_points == 2601
    det = config.detector()
    assert isinstance(det.jitter, LogNormal)
    assert det.jitter.mean == pytest.approx(1.0)
    assert det.efficiency == 1.0


def test_jitter_sweep_overrides_std(scenario_dir):
    config = load_scenario(os.path.join(scenario_dir, "fig3_delay.yaml"))
    assert config.jitter_stds() == [0.25, 0.5, 1.0]
    assert config.detector("a", jitter_std=0.25).jitter.std == pytest.approx(0.25)
    assert config.grid_step() == 0.01
    assert config.delay_amplitude(0.01) is None


def test_cli_overrides_seed_and_trials(scenario_dir):
    path = os.path.join(scenario_dir, "oracle_suite.yaml")
    assert load_scenario(path).seed == 1729
    config = load_scenario(path, seed=5, n_trials=20_000)
    assert (config.seed, config.n_trials) == (5, 20_000)


def test_defaults():
    config = load(BASE)
    assert config.seed == 0
    assert config.n_trials == 1_000_000
    assert config.detector().dark_count_rate == 0.0


def test_per_arm_sections_fall_back_to_shared_detector():
    config = load(BASE + "detector_b:\n  efficiency: 0.5\n  jitter: rectangular\n  low: 0.0\n  high: 2.0\n")
    det_a, det_b = config.detector("a"), config.detector("b")
    assert det_a.efficiency == 0.8
    assert isinstance(det_a.jitter, LogNormal)
    assert det_b.efficiency == 0.5
    assert det_b.jitter == Rectangular(0.0, 2.0)


def test_unknown_section_reports_line():
    with pytest.raises(ConfigError) as err:
        load(BASE + "detectors:\n  jitter: lognormal\n")
    assert err.value.field == "detectors"
    assert err.value.line == 10


def test_unknown_key_reports_field_and_line():
    with pytest.raises(ConfigError) as err:
        load("""\
            detector:
              jitter: lognormal
              jiter_std: 0.5
            """)
    assert err.value.field == "detector.jiter_std"
    assert err.value.line == 3


@pytest.mark.parametrize("line, field", [
    ("  efficiency: high", "detector.efficiency"),
    ("  efficiency: true", "detector.efficiency"),
    ("  jitter: 3", "detector.jitter"),
])
def test_wrong_types(line, field):
    text = "detector:\n  mean: 1.0\n  std: 0.5\n" + line + "\n"
    with pytest.raises(ConfigError) as err:
        ScenarioLoader().load_text(text)
    assert err.value.field == field
    assert err.value.line == 4


def test_model_invariants_surface_as_config_errors():
    with pytest.raises(ConfigError) as err:
        load(BASE.replace("efficiency: 0.8", "efficiency: 1.5"))
    assert err.value.field == "detector"
    with pytest.raises(ConfigError):
        load(BASE.replace("std: 0.5", "std: -0.5"))
    with pytest.raises(ConfigError):
        load(BASE.replace("jitter: lognormal", "jitter: gamma"))


def test_missing_keys():
    with pytest.raises(ConfigError) as err:
        load("detector:\n  efficiency: 0.5\n")
    assert err.value.field == "detector.jitter"
    with pytest.raises(ConfigError) as err:
        load(BASE.replace("  t_max: 13.0\n", ""))
    assert err.value.field == "grid.t_max"


def test_bad_grid():
    with pytest.raises(ConfigError):
        load(BASE.replace("t_max: 13.0", "t_max: -1.0"))
    with pytest.raises(ConfigError):
        load(BASE.replace("dt: 0.005", "dt: 0.0"))


def test_run_section_validation():
    with pytest.raises(ConfigError) as err:
        load(BASE + "run:\n  command: plot\n")
    assert err.value.field == "run.command"
    assert err.value.line == 11
    with pytest.raises(ConfigError):
        load(BASE + "run:\n  seed: -3\n")
    with pytest.raises(ConfigError):
        load(BASE + "run:\n  n_trials: 0\n")
    assert load(BASE + "run:\n  herald_time: mean\n").get("run", "herald_time") == "mean"
    assert load(BASE + "run:\n  herald_time: 2\n").get("run", "herald_time") == 2.0


def test_invalid_yaml_reports_line():
    with pytest.raises(ConfigError) as err:
        ScenarioLoader().load_text("detector:\n  jitter: [lognormal\n")
    assert err.value.line is not None


def test_top_level_must_be_mapping():
    with pytest.raises(ConfigError):
        ScenarioLoader().load_text("- detector\n")


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_scenario(str(tmp_path / "absent.yaml"))


def test_states_from_config():
    config = load((BASE + textwrap.dedent("""\
        state:
          envelope: gaussian
          center: 0.0
          std: 0.2
          delay: rectangular
          delay_width: 0.5
        """)).replace("t_min: 0.0", "t_min: -2.0"))
    assert isinstance(config.envelope(), GaussianAmplitude)
    chi = config.delay_amplitude(0.01)
    assert isinstance(chi, RectangularAmplitude)
    assert config.delay_intensity(0.01).mass == pytest.approx(1.0, abs=0.02)
    assert callable(config.pair_sampler())


def test_simultaneous_pairs_and_photon_lists():
    config = load((BASE + textwrap.dedent("""\
        state:
          envelope: rectangular
          width: 1.0
          photons: [0.0, 0.5, 0.5]
        """)).replace("t_min: 0.0", "t_min: -1.0"))
    assert isinstance(config.pair_sampler(), SimultaneousPairSampler)
    [pattern] = config.arrival_patterns()
    assert pattern.arrival_times == (0.0, 0.5, 0.5)
    with pytest.raises(ConfigError):
        load(BASE + "state:\n  envelope: triangle\n").envelope()
    with pytest.raises(ConfigError):
        load(BASE + "sweep:\n  k: [0, 2]\n").arrival_patterns()


@pytest.mark.parametrize("block", [
    "detector:\n  jitter: rectangular\n  low: 0.0\n  high: 2.0\n",
    "detector:\n  jitter: near_delta\n  center: 1.0\n  halfwidth: 0.001\n",
])
def test_jitter_std_sweep_rejects_families_without_std(block):
    with pytest.raises(ConfigError) as err:
        ScenarioLoader().load_text(block + "sweep:\n  jitter_std: [0.25, 0.5]\n")
    assert err.value.field == "sweep.jitter_std"
    assert err.value.line == 6


def test_jitter_std_sweep_checks_every_arm():
    text = BASE + "detector_b:\n  jitter: rectangular\n  low: 0.0\n  high: 2.0\nsweep:\n  jitter_std: [0.25]\n"
    with pytest.raises(ConfigError) as err:
        load(text)
    assert err.value.field == "sweep.jitter_std"
    assert load(BASE + "sweep:\n  jitter_std: [0.25]\n").detector(jitter_std=0.25).jitter.std == pytest.approx(0.25)


def test_oracle_suite_heralds_with_the_default_window(scenario_dir):
    config = load_scenario(os.path.join(scenario_dir, "oracle_suite.yaml"))
    assert config.get("run", "herald_window") is None
    assert config.grid_step() == 0.002
