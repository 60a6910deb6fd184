"""
Monte Carlo oracle checks: every analytic density against an event-level simulation.

Each check returns a dict row with keys check, statistic, bound, passed, seed
and n_effective. KS checks pass below 3/sqrt(n_effective); click-fraction
checks pass within 5 binomial standard errors.
"""

import logging
from typing import Dict, List

import pandas as pd

from src.analysis.coincidence import delay_density_factorized
from src.analysis.heralding import heralded_state
from src.analysis.povm import DetectorModel, PhotonArrivalPattern, firing_density
from src.analysis.timegrid import TimeGrid
from src.data.scenario_config import ScenarioConfig
from src.exceptions import ConfigError
from src.simulation.montecarlo import (
    DEFAULT_BINS,
    binomial_zscore,
    ks_bound,
    ks_distance,
    simulate_firing,
    simulate_heralded,
    simulate_pair_delays,
)
from src.tools.figures import delay_grid_for, herald_times

logger = logging.getLogger(__name__)

MAX_ZSCORE = 5.0
MIN_TRIALS = 10_000

REPORT_COLUMNS = ["check", "statistic", "bound", "passed", "seed", "n_effective"]


def _row(check: str, statistic: float, bound: float, seed: int, n_effective: int) -> Dict:
    return {
        "check": check,
        "statistic": float(statistic),
        "bound": float(bound),
        "passed": bool(statistic < bound),
        "seed": int(seed),
        "n_effective": int(n_effective),
    }


def check_firing(det: DetectorModel, pattern: PhotonArrivalPattern, grid: TimeGrid, n_trials: int,
                 seed: int, n_bins: int = DEFAULT_BINS, n_jobs: int = 1) -> List[Dict]:
    """KS check of first-click times plus the no-click fraction (1 - eta)^k."""
    analytic = firing_density(det, pattern, grid)
    bins = TimeGrid(grid.t_min, grid.t_max, n_bins + 1)
    hist = simulate_firing(det, pattern, n_trials, seed, bins=bins, n_jobs=n_jobs)
    name = f"firing_k{pattern.k}"
    expected_off = (1.0 - det.efficiency) ** pattern.k
    z = binomial_zscore(hist.n_no_click / hist.n_trials, expected_off, hist.n_trials)
    return [
        _row(name, ks_distance(hist, analytic), ks_bound(hist.n_in_bins), seed, hist.n_in_bins),
        _row(f"no_click_k{pattern.k}", z, MAX_ZSCORE, seed, hist.n_trials),
    ]


def check_pair_delays(config: ScenarioConfig, n_trials: int, seed: int, n_jobs: int = 1) -> List[Dict]:
    """
    KS check of the delay histogram against the factorized delay density, plus
    the both-click fraction against eta_A * eta_B of the configured detectors.
    """
    det_a, det_b = config.detector("a"), config.detector("b")
    scale = config.get("run", "perturb_efficiency_b", 1.0)
    det_b_sim = det_b
    if scale != 1.0:
        det_b_sim = det_b.with_efficiency(min(1.0, det_b.efficiency * scale))
        logger.warning("Simulating arm B with efficiency %.4g instead of %.4g.", det_b_sim.efficiency, det_b.efficiency)

    delay_grid = delay_grid_for(config)
    analytic = delay_density_factorized(det_a, det_b, config.delay_intensity(delay_grid.dt), delay_grid)
    n_bins = config.get("run", "bins", DEFAULT_BINS)
    bins = TimeGrid(delay_grid.t_min, delay_grid.t_max, n_bins + 1)
    hist = simulate_pair_delays(det_a, det_b_sim, config.pair_sampler(), n_trials, seed, bins, n_jobs=n_jobs)

    expected_both = det_a.efficiency * det_b.efficiency
    z = binomial_zscore(hist.n_recorded / hist.n_trials, expected_both, hist.n_trials)
    return [
        _row("pair_delay", ks_distance(hist, analytic), ks_bound(hist.n_in_bins), seed, hist.n_in_bins),
        _row("both_click", z, MAX_ZSCORE, seed, hist.n_trials),
    ]


def check_heralded(config: ScenarioConfig, n_trials: int, seed: int, n_jobs: int = 1) -> List[Dict]:
    """KS check of emission times conditioned on a herald click near T against heralded_state."""
    psi = config.envelope()
    det_b = config.detector("b")
    herald_time = herald_times(config, [det_b], psi)[0]
    window = config.get("run", "herald_window", 2.0 * psi.grid.dt)
    analytic = heralded_state(det_b, psi, herald_time)

    lo, hi = psi.support
    n_bins = config.get("run", "bins", DEFAULT_BINS)
    bins = TimeGrid(lo, hi, n_bins + 1)
    hist = simulate_heralded(det_b, psi.sample, herald_time, window, n_trials, seed, bins, n_jobs=n_jobs)
    return [_row("heralded", ks_distance(hist, analytic), ks_bound(hist.n_in_bins), seed, hist.n_in_bins)]


def run_oracle_suite(config: ScenarioConfig, n_jobs: int = 1) -> pd.DataFrame:
    """
    Run every check the scenario has inputs for: firing times when the state
    names photons, pair delays and heralding when it names an envelope.
    Check i uses seed run.seed + i.
    """
    n_trials = config.n_trials
    if n_trials < MIN_TRIALS:
        raise config.error(f"oracle checks need at least {MIN_TRIALS} trials, got {n_trials}", "run.n_trials")
    state = config.section("state")
    has_photons = "photons" in state or "k" in state or "k" in config.section("sweep")
    has_envelope = "envelope" in state
    if not (has_photons or has_envelope):
        raise ConfigError("nothing to check: state needs photons/k or an envelope", field="state")

    seed = config.seed
    rows: List[Dict] = []
    if has_photons:
        det = config.detector("")
        grid = config.time_grid()
        n_bins = config.get("run", "bins", DEFAULT_BINS)
        for pattern in config.arrival_patterns():
            rows += check_firing(det, pattern, grid, n_trials, seed, n_bins, n_jobs)
            seed += 1
    if has_envelope:
        rows += check_pair_delays(config, n_trials, seed, n_jobs)
        seed += 1
        rows += check_heralded(config, n_trials, seed, n_jobs)

    report = pd.DataFrame(rows, columns=REPORT_COLUMNS)
    failed = report.loc[~report["passed"], "check"].tolist()
    if failed:
        logger.warning("Oracle checks failed: %s", ", ".join(failed))
    else:
        logger.info("All %d oracle checks passed.", len(report))
    return report
