"""
Scenario configuration loading.

A scenario is a YAML file with flat typed sections (detector, detector_a,
detector_b, state, grid, sweep, run). Unknown sections or keys, wrong types
and parameters that violate a model invariant are reported as ConfigError
with the offending field and its line. See docs/config_grammar.md.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple

import yaml

from src.analysis.distributions import LogNormal, TruncatedGaussian, build_jitter
from src.analysis.povm import DetectorModel, PhotonArrivalPattern
from src.analysis.states import (
    FactorizedJointAmplitude,
    GaussianAmplitude,
    RectangularAmplitude,
    SimultaneousPairSampler,
    TemporalAmplitude,
    delay_intensity,
)
from src.analysis.timegrid import DensityOverDelay, TimeGrid
from src.exceptions import ConfigError, JitterPovmError

logger = logging.getLogger(__name__)

FLOAT = "float"
INT = "int"
STR = "str"
FLOAT_LIST = "float_list"
INT_LIST = "int_list"
FLOAT_OR_MEAN = "float_or_mean"

DETECTOR_KEYS = {
    "jitter": STR,
    "mean": FLOAT,
    "std": FLOAT,
    "low": FLOAT,
    "high": FLOAT,
    "center": FLOAT,
    "halfwidth": FLOAT,
    "efficiency": FLOAT,
    "dark_count_rate": FLOAT,
}

SCHEMA = {
    "detector": DETECTOR_KEYS,
    "detector_a": DETECTOR_KEYS,
    "detector_b": DETECTOR_KEYS,
    "state": {
        "photons": FLOAT_LIST,
        "k": INT,
        "arrival_time": FLOAT,
        "envelope": STR,
        "center": FLOAT,
        "width": FLOAT,
        "std": FLOAT,
        "delay": STR,
        "delay_center": FLOAT,
        "delay_width": FLOAT,
        "delay_std": FLOAT,
    },
    "grid": {
        "t_min": FLOAT,
        "t_max": FLOAT,
        "n_points": INT,
        "dt": FLOAT,
        "delay_half_width": FLOAT,
    },
    "sweep": {
        "k": INT_LIST,
        "jitter_std": FLOAT_LIST,
    },
    "run": {
        "command": STR,
        "n_trials": INT,
        "seed": INT,
        "output": STR,
        "herald_time": FLOAT_OR_MEAN,
        "herald_window": FLOAT,
        "perturb_efficiency_b": FLOAT,
        "bins": INT,
    },
}

COMMANDS = ("density", "delay", "herald", "oracle-check")
ENVELOPES = ("rectangular", "gaussian")
DELAY_SHAPES = ("simultaneous", "rectangular", "gaussian")
# Jitter families whose std a sweep can override.
STD_FAMILIES = (LogNormal.kind, TruncatedGaussian.kind)


def _coerce(value: Any, kind: str, name: str, line: Optional[int]) -> Any:
    is_number = isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == FLOAT and is_number:
        return float(value)
    if kind == INT and isinstance(value, int) and not isinstance(value, bool):
        return value
    if kind == STR and isinstance(value, str):
        return value
    if kind == FLOAT_OR_MEAN:
        if value == "mean":
            return value
        if is_number:
            return float(value)
    if kind in (FLOAT_LIST, INT_LIST) and isinstance(value, list) and value:
        item = FLOAT if kind == FLOAT_LIST else INT
        return [_coerce(v, item, name, line) for v in value]
    raise ConfigError(f"expected {kind.replace('_', ' ')}, got {value!r}", field=name, line=line)


def _key_lines(root: yaml.Node) -> Dict[str, int]:
    """Map 'section' and 'section.key' to 1-based line numbers from the composed node tree."""
    lines: Dict[str, int] = {}
    if not isinstance(root, yaml.MappingNode):
        return lines
    for key_node, value_node in root.value:
        section = key_node.value
        lines[section] = key_node.start_mark.line + 1
        if isinstance(value_node, yaml.MappingNode):
            for sub_key, _ in value_node.value:
                lines[f"{section}.{sub_key.value}"] = sub_key.start_mark.line + 1
    return lines


@dataclass
class ScenarioConfig:
    """Parsed scenario; typed section dicts plus line numbers for diagnostics."""

    sections: Dict[str, Dict[str, Any]]
    lines: Dict[str, int] = field(default_factory=dict)
    source: str = "<string>"

    def section(self, name: str) -> Dict[str, Any]:
        return self.sections.get(name, {})

    def get(self, section: str, key: str, default: Any = None) -> Any:
        return self.section(section).get(key, default)

    def require(self, section: str, key: str) -> Any:
        if key not in self.section(section):
            raise ConfigError("required key is missing", field=f"{section}.{key}", line=self.lines.get(section))
        return self.section(section)[key]

    def error(self, message: str, name: str) -> ConfigError:
        line = self.lines.get(name, self.lines.get(name.split(".")[0]))
        return ConfigError(message, field=name, line=line)

    # --- Detectors ---

    def detector_block(self, which: str) -> Tuple[str, Dict[str, Any]]:
        """'a' and 'b' fall back to the shared 'detector' section, per key."""
        name = f"detector_{which}" if which in ("a", "b") else "detector"
        merged = dict(self.section("detector"))
        merged.update(self.section(name))
        if not merged:
            raise ConfigError("no detector section", field=name)
        return name, merged

    def detector(self, which: str = "", jitter_std: Optional[float] = None) -> DetectorModel:
        """
        Build a detector from its section. jitter_std overrides the jitter's std
        (used by sweeps).
        """
        name, block = self.detector_block(which)
        if "jitter" not in block:
            raise self.error("required key is missing", f"{name}.jitter")
        if jitter_std is not None and str(block["jitter"]).lower() not in STD_FAMILIES:
            raise self.error(f"a jitter_std sweep needs a jitter with a std parameter, "
                             f"'{block['jitter']}' has none", "sweep.jitter_std")
        std = jitter_std if jitter_std is not None else block.get("std")
        try:
            jitter = build_jitter(block["jitter"], mean=block.get("mean"), std=std, low=block.get("low"),
                                  high=block.get("high"), center=block.get("center"),
                                  halfwidth=block.get("halfwidth"))
            return DetectorModel(block.get("efficiency", 1.0), jitter, block.get("dark_count_rate", 0.0))
        except (JitterPovmError, TypeError) as e:
            raise self.error(str(e), name) from e

    def jitter_stds(self) -> List[Optional[float]]:
        return self.get("sweep", "jitter_std") or [None]

    # --- Grids ---

    def time_grid(self) -> TimeGrid:
        t_min = self.require("grid", "t_min")
        t_max = self.require("grid", "t_max")
        dt = self.get("grid", "dt")
        n_points = None if dt is not None else self.require("grid", "n_points")
        try:
            if dt is not None:
                return TimeGrid.from_step(t_min, t_max, dt)
            return TimeGrid(t_min, t_max, n_points)
        except JitterPovmError as e:
            raise self.error(str(e), "grid") from e

    def grid_step(self) -> float:
        if "dt" in self.section("grid"):
            return self.get("grid", "dt")
        return self.time_grid().dt

    # --- States ---

    def arrival_patterns(self) -> List[PhotonArrivalPattern]:
        """Explicit photon list, or one simultaneous pattern per swept/configured k."""
        state = self.section("state")
        if "photons" in state:
            return [PhotonArrivalPattern(tuple(state["photons"]))]
        ks = self.get("sweep", "k") or ([state["k"]] if "k" in state else None)
        if ks is None:
            raise self.error("state needs 'photons' or 'k' (or sweep.k)", "state")
        if any(k < 1 for k in ks):
            raise self.error(f"photon numbers must be >= 1, got {ks}", "sweep.k" if "k" in self.section("sweep") else "state.k")
        return [PhotonArrivalPattern.simultaneous(k, state.get("arrival_time", 0.0)) for k in ks]

    def envelope(self, grid: Optional[TimeGrid] = None) -> TemporalAmplitude:
        grid = grid or self.time_grid()
        shape = self.require("state", "envelope")
        center = self.get("state", "center", 0.0)
        try:
            if shape == "rectangular":
                return RectangularAmplitude(center, self.require("state", "width"), grid)
            if shape == "gaussian":
                return GaussianAmplitude(center, self.require("state", "std"), grid)
        except JitterPovmError as e:
            if isinstance(e, ConfigError):
                raise
            raise self.error(str(e), "state.envelope") from e
        raise self.error(f"unknown envelope '{shape}', expected one of {ENVELOPES}", "state.envelope")

    def delay_amplitude(self, dt: float) -> Optional[TemporalAmplitude]:
        """Relative-delay amplitude chi on a symmetric grid with step dt; None for simultaneous pairs."""
        shape = self.get("state", "delay", "simultaneous")
        if shape == "simultaneous":
            return None
        center = self.get("state", "delay_center", 0.0)
        try:
            if shape == "rectangular":
                width = self.require("state", "delay_width")
                return RectangularAmplitude(center, width, TimeGrid.symmetric(abs(center) + width, dt))
            if shape == "gaussian":
                std = self.require("state", "delay_std")
                return GaussianAmplitude(center, std, TimeGrid.symmetric(abs(center) + 7.0 * std, dt))
        except JitterPovmError as e:
            if isinstance(e, ConfigError):
                raise
            raise self.error(str(e), "state.delay") from e
        raise self.error(f"unknown delay shape '{shape}', expected one of {DELAY_SHAPES}", "state.delay")

    def delay_intensity(self, dt: float) -> Optional[DensityOverDelay]:
        chi = self.delay_amplitude(dt)
        return None if chi is None else delay_intensity(chi)

    def pair_sampler(self):
        """Sampler of emission times (t_A, t_B) for the configured pair state."""
        psi = self.envelope()
        chi = self.delay_amplitude(self.grid_step())
        if chi is None:
            return SimultaneousPairSampler(psi)
        return FactorizedJointAmplitude(psi, chi).sample

    # --- Run ---

    @property
    def seed(self) -> int:
        return self.get("run", "seed", 0)

    @property
    def n_trials(self) -> int:
        return self.get("run", "n_trials", 1_000_000)


class ScenarioLoader:
    """Read and validate scenario files; CLI overrides are applied after parsing."""

    def __init__(self, seed: Optional[int] = None, n_trials: Optional[int] = None):
        self.seed = seed
        self.n_trials = n_trials

    def load(self, path: str) -> ScenarioConfig:
        """
        Load a scenario file.

        Raises:
            ConfigError: unreadable file, YAML syntax error or schema violation.
        """
        try:
            with open(path, "r", encoding="utf-8") as f:
                text = f.read()
        except OSError as e:
            raise ConfigError(f"cannot read scenario file: {e.strerror}", field=path) from e
        return self.load_text(text, source=path)

    def load_text(self, text: str, source: str = "<string>") -> ScenarioConfig:
        try:
            root = yaml.compose(text)
            raw = yaml.safe_load(text)
        except yaml.YAMLError as e:
            mark = getattr(e, "problem_mark", None)
            raise ConfigError(f"invalid YAML: {getattr(e, 'problem', e)}",
                              line=mark.line + 1 if mark is not None else None) from e
        if raw is None:
            raw = {}
        if not isinstance(raw, dict):
            raise ConfigError("top level must be a mapping of sections", line=1)

        lines = _key_lines(root)
        sections: Dict[str, Dict[str, Any]] = {}
        for name, body in raw.items():
            if name not in SCHEMA:
                raise ConfigError(f"unknown section, expected one of {sorted(SCHEMA)}", field=str(name),
                                  line=lines.get(str(name)))
            if body is None:
                body = {}
            if not isinstance(body, dict):
                raise ConfigError("section must be a mapping", field=name, line=lines.get(name))
            typed = {}
            for key, value in body.items():
                dotted = f"{name}.{key}"
                if key not in SCHEMA[name]:
                    raise ConfigError(f"unknown key, expected one of {sorted(SCHEMA[name])}", field=dotted,
                                      line=lines.get(dotted))
                typed[key] = _coerce(value, SCHEMA[name][key], dotted, lines.get(dotted))
            sections[name] = typed

        run = sections.setdefault("run", {})
        if self.seed is not None:
            run["seed"] = self.seed
        if self.n_trials is not None:
            run["n_trials"] = self.n_trials
        config = ScenarioConfig(sections, lines, source)
        self._validate(config)
        logger.debug("Loaded scenario %s with sections %s", source, sorted(sections))
        return config

    def _validate(self, config: ScenarioConfig) -> None:
        command = config.get("run", "command")
        if command is not None and command not in COMMANDS:
            raise config.error(f"unknown command '{command}', expected one of {COMMANDS}", "run.command")
        if config.seed < 0:
            raise config.error("seed must be >= 0", "run.seed")
        if config.n_trials < 1:
            raise config.error("n_trials must be >= 1", "run.n_trials")
        perturb = config.get("run", "perturb_efficiency_b", 1.0)
        if perturb < 0:
            raise config.error("efficiency scale must be >= 0", "run.perturb_efficiency_b")
        for name in ("detector", "detector_a", "detector_b"):
            if name in config.sections:
                for std in config.jitter_stds():
                    config.detector(name.replace("detector", "").lstrip("_"), jitter_std=std)
        grid = config.section("grid")
        if "t_min" in grid or "t_max" in grid:
            config.time_grid()
        if "dt" in grid and not grid["dt"] > 0:
            raise config.error("grid step must be positive", "grid.dt")


def load_scenario(path: str, seed: Optional[int] = None, n_trials: Optional[int] = None) -> ScenarioConfig:
    return ScenarioLoader(seed=seed, n_trials=n_trials).load(path)
