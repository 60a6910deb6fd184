"""
Figure sweeps as tables.

Each builder turns a scenario into a DataFrame whose first column is the
abscissa (T, delta or t) and whose other columns are one density per setting.
A scenario with a single setting keeps the plain headers T,p_on / delta,p / t,w.
"""

import logging
from typing import Dict, List, Optional

import numpy as np
import pandas as pd

from src.analysis.coincidence import default_delay_grid, delay_density_factorized, full_width_half_maximum
from src.analysis.heralding import heralded_state, mean_herald_time
from src.analysis.povm import add_dark_counts, firing_density
from src.analysis.timegrid import SampledDensity, TimeGrid, describe
from src.data.scenario_config import ScenarioConfig

logger = logging.getLogger(__name__)


def column_label(prefix: str, k: Optional[int] = None, std: Optional[float] = None) -> str:
    """'p_on', 'p_on_k2', 'p_std0.25', 'w_std1' ..."""
    label = prefix
    if k is not None:
        label += f"_k{k}"
    if std is not None:
        label += f"_std{std:g}"
    return label


def firing_density_table(config: ScenarioConfig) -> pd.DataFrame:
    """Firing-time densities for every configured photon number and jitter std."""
    grid = config.time_grid()
    patterns = config.arrival_patterns()
    stds = config.jitter_stds()
    columns: Dict[str, np.ndarray] = {"T": grid.points}
    for std in stds:
        det = config.detector("", jitter_std=std)
        for pattern in patterns:
            p = add_dark_counts(firing_density(det, pattern, grid), det)
            label = column_label(
                "p_on",
                k=pattern.k if len(patterns) > 1 else None,
                std=std if len(stds) > 1 else None,
            )
            columns[label] = p.values
            logger.info("%s: %s", label, describe(p))
    return pd.DataFrame(columns)


def delay_grid_for(config: ScenarioConfig) -> TimeGrid:
    """Common delay grid: configured half width, or the widest default over the sweep."""
    dt = config.grid_step()
    half_width = config.get("grid", "delay_half_width")
    if half_width is not None:
        return TimeGrid.symmetric(half_width, dt)
    chi = config.delay_intensity(dt)
    grids = [
        default_delay_grid(config.detector("a", jitter_std=std), config.detector("b", jitter_std=std), dt, chi)
        for std in config.jitter_stds()
    ]
    return max(grids, key=lambda g: g.t_max)


def delay_density_table(config: ScenarioConfig) -> pd.DataFrame:
    """Start-stop delay densities, one column per jitter std."""
    delay_grid = delay_grid_for(config)
    chi = config.delay_intensity(delay_grid.dt)
    stds = config.jitter_stds()
    columns: Dict[str, np.ndarray] = {"delta": delay_grid.points}
    for std in stds:
        det_a = config.detector("a", jitter_std=std)
        det_b = config.detector("b", jitter_std=std)
        p = delay_density_factorized(det_a, det_b, chi, delay_grid)
        label = column_label("p", std=std if len(stds) > 1 else None)
        columns[label] = p.values
        logger.info("%s: %s", label, describe(p))
    return pd.DataFrame(columns)


def herald_times(config: ScenarioConfig, detectors, psi) -> List[float]:
    configured = config.get("run", "herald_time", "mean")
    if configured == "mean":
        return [mean_herald_time(det, psi) for det in detectors]
    return [configured] * len(detectors)


def herald_table(config: ScenarioConfig) -> pd.DataFrame:
    """Heralded-state weights on the wavepacket grid, one column per jitter std."""
    psi = config.envelope()
    stds = config.jitter_stds()
    detectors = [config.detector("b", jitter_std=std) for std in stds]
    columns: Dict[str, np.ndarray] = {"t": psi.grid.points}
    for std, det, herald_time in zip(stds, detectors, herald_times(config, detectors, psi)):
        state = heralded_state(det, psi, herald_time)
        label = column_label("w", std=std if len(stds) > 1 else None)
        columns[label] = state.values
        logger.info("%s (T=%.4g): %s", label, herald_time, describe(state))
    return pd.DataFrame(columns)


def summarize(frame: pd.DataFrame) -> pd.DataFrame:
    """Mass, mode, mean, std and FWHM of every density column of a figure table."""
    x = frame.iloc[:, 0].to_numpy()
    grid = TimeGrid(x[0], x[-1], len(x))
    rows = []
    for name in frame.columns[1:]:
        density = SampledDensity(grid, frame[name].to_numpy())
        row = {"series": name, **describe(density)}
        row["fwhm"] = full_width_half_maximum(density) if density.mass > 0 else float("nan")
        rows.append(row)
    return pd.DataFrame(rows)
