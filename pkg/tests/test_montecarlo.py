import math

import numpy as np
import pytest

from src.analysis.coincidence import delay_density_factorized
from src.analysis.distributions import NearDelta, TruncatedGaussian
from src.analysis.heralding import heralded_state
from src.analysis.povm import (
    DetectorModel,
    PhotonArrivalPattern,
    expected_on_probability,
    firing_density,
)
from src.analysis.states import GaussianAmplitude, RectangularAmplitude, simultaneous_pair
from src.analysis.timegrid import TimeGrid
from src.exceptions import DomainError, InsufficientStatisticsError, ParameterError
from src.simulation import (
    ClickHistogram,
    click_fractions,
    ks_bound,
    ks_distance,
    simulate_firing,
    simulate_heralded,
    simulate_pair_delays,
)
from src.simulation.montecarlo import CHUNK_SIZE, binomial_zscore
from src.tools.oracle_checks import check_firing

MAX_ZSCORE = 5.0


@pytest.fixture
def spread_pattern():
    return PhotonArrivalPattern((0.0, 0.8))


def test_same_seed_same_histogram_for_any_worker_count(jitter_half, spread_pattern):
    det = DetectorModel(0.8, jitter_half)
    n = 2 * CHUNK_SIZE + 123
    serial = simulate_firing(det, spread_pattern, n, seed=42)
    again = simulate_firing(det, spread_pattern, n, seed=42)
    parallel = simulate_firing(det, spread_pattern, n, seed=42, n_jobs=2)
    np.testing.assert_array_equal(serial.counts, again.counts)
    np.testing.assert_array_equal(serial.counts, parallel.counts)
    assert serial.n_no_click == parallel.n_no_click
    other = simulate_firing(det, spread_pattern, n, seed=43)
    assert not np.array_equal(serial.counts, other.counts)


def test_every_trial_is_accounted_for(jitter_half, spread_pattern):
    det = DetectorModel(0.5, jitter_half)
    bins = TimeGrid(0.0, 2.0, 101)
    hist = simulate_firing(det, spread_pattern, 50_000, seed=1, bins=bins)
    assert hist.n_in_bins + hist.n_outside + hist.n_no_click == hist.n_trials
    assert hist.n_outside > 0
    fractions = click_fractions(hist)
    assert fractions["click_fraction"] + fractions["no_click_fraction"] == pytest.approx(1.0)


def test_firing_histogram_matches_density(jitter_half, spread_pattern):
    det = DetectorModel(0.8, jitter_half)
    n = 200_000
    hist = simulate_firing(det, spread_pattern, n, seed=7)
    grid = TimeGrid.from_step(0.0, 0.8 + jitter_half.support[1], 0.002)
    p = firing_density(det, spread_pattern, grid)
    assert ks_distance(hist, p) < ks_bound(hist.n_in_bins)
    no_click = (1.0 - det.efficiency) ** 2
    assert binomial_zscore(hist.n_no_click / n, no_click, n) < MAX_ZSCORE
    assert binomial_zscore(hist.n_recorded / n, expected_on_probability(det, 2), n) < MAX_ZSCORE


def test_histogram_density_tracks_analytic_values(ideal_detector):
    pattern = PhotonArrivalPattern.simultaneous(1)
    bins = TimeGrid(0.0, 4.0, 41)
    hist = simulate_firing(ideal_detector, pattern, 400_000, seed=3, bins=bins)
    expected = ideal_detector.jitter.pdf(hist.centers)
    np.testing.assert_allclose(hist.density(), expected, rtol=0, atol=0.03)


def test_dark_counts_fire_the_vacuum(jitter_half):
    det = DetectorModel(1.0, jitter_half, dark_count_rate=0.05)
    n = 100_000
    hist = simulate_firing(det, PhotonArrivalPattern(()), n, seed=5, dark_window=(0.0, 10.0))
    assert binomial_zscore(hist.n_no_click / n, math.exp(-0.5), n) < MAX_ZSCORE
    with pytest.raises(DomainError):
        simulate_firing(det, PhotonArrivalPattern(()), n, seed=5)


def test_pair_delays_match_cross_correlation():
    det_a = DetectorModel(0.7, TruncatedGaussian(1.0, 0.2))
    det_b = DetectorModel(0.9, TruncatedGaussian(1.2, 0.3))
    psi = GaussianAmplitude(0.0, 0.2, TimeGrid.from_step(-1.5, 1.5, 0.01))
    bins = TimeGrid.symmetric(3.5, 0.01)
    n = 200_000
    hist = simulate_pair_delays(det_a, det_b, simultaneous_pair(psi), n, seed=11, bins=bins)
    p = delay_density_factorized(det_a, det_b, delay_grid=bins)
    assert ks_distance(hist, p) < ks_bound(hist.n_in_bins)
    assert binomial_zscore(hist.n_recorded / n, 0.7 * 0.9, n) < MAX_ZSCORE
    assert hist.mean() == pytest.approx(0.2, abs=MAX_ZSCORE * math.sqrt(0.13 / hist.n_in_bins))


def test_heralded_emission_times_match_state(jitter_quarter):
    det = DetectorModel(0.9, jitter_quarter)
    box = RectangularAmplitude(0.0, 1.0, TimeGrid.from_step(-0.6, 0.6, 0.001))
    bins = TimeGrid(-0.5, 0.5, 201)
    hist = simulate_heralded(det, box.sample, 1.0, 0.02, 200_000, seed=17, bins=bins)
    state = heralded_state(det, box, 1.0)
    assert hist.n_recorded > 1_000
    assert ks_distance(hist, state) < ks_bound(hist.n_in_bins)
    assert hist.n_no_click == hist.n_trials - hist.n_recorded


def test_impossible_herald_has_no_statistics(jitter_quarter):
    det = DetectorModel(1.0, jitter_quarter)
    box = RectangularAmplitude(0.0, 1.0, TimeGrid.from_step(-0.6, 0.6, 0.001))
    with pytest.raises(InsufficientStatisticsError) as err:
        simulate_heralded(det, box.sample, -5.0, 0.02, 10_000, seed=0, bins=TimeGrid(-0.5, 0.5, 11))
    assert err.value.n_trials == 10_000
    with pytest.raises(ParameterError):
        simulate_heralded(det, box.sample, 1.0, 0.0, 10_000, seed=0, bins=TimeGrid(-0.5, 0.5, 11))


@pytest.mark.parametrize("n_trials, seed", [(0, 1), (10, -1), (10, 1.5)])
def test_invalid_runs_rejected(jitter_half, n_trials, seed):
    det = DetectorModel(1.0, jitter_half)
    with pytest.raises(ParameterError):
        simulate_firing(det, PhotonArrivalPattern((0.0,)), n_trials, seed)


def test_histogram_validation_and_merge():
    edges = np.linspace(0.0, 1.0, 5)
    a = ClickHistogram(edges, [1, 2, 3, 4], n_trials=12, n_no_click=2)
    b = ClickHistogram(edges, [0, 1, 0, 1], n_trials=3, n_no_click=0, n_outside=1)
    merged = a + b
    np.testing.assert_array_equal(merged.counts, [1, 3, 3, 5])
    assert (merged.n_trials, merged.n_no_click, merged.n_outside) == (15, 2, 1)
    with pytest.raises(DomainError):
        ClickHistogram(edges, [1, 2, 3, 4], n_trials=11, n_no_click=2)
    with pytest.raises(DomainError):
        ClickHistogram(edges, [1, 2, 3], n_trials=6, n_no_click=0)
    with pytest.raises(DomainError):
        a + ClickHistogram(np.linspace(0.0, 2.0, 5), [0, 0, 0, 0], n_trials=0, n_no_click=0)


def test_zscore_of_certain_outcomes():
    assert binomial_zscore(1.0, 1.0, 100) == 0.0
    assert binomial_zscore(0.9, 1.0, 100) == math.inf


def test_blind_detector_never_clicks(jitter_half):
    hist = simulate_firing(DetectorModel(0.0, jitter_half), PhotonArrivalPattern((0.0, 1.0)), 10_000, seed=2)
    assert hist.n_no_click == hist.n_trials


def test_three_photons_at_half_efficiency(jitter_half):
    n = 1_000_000
    hist = simulate_firing(DetectorModel(0.5, jitter_half), PhotonArrivalPattern.simultaneous(3), n, seed=31)
    assert binomial_zscore(hist.n_no_click / n, 0.125, n) < MAX_ZSCORE


def test_sharp_detectors_record_zero_delay():
    det = DetectorModel(1.0, NearDelta(1.0, 1e-6))
    psi = GaussianAmplitude(0.0, 0.2, TimeGrid.from_step(-1.5, 1.5, 0.01))
    bins = TimeGrid.symmetric(0.01, 0.001)
    hist = simulate_pair_delays(det, det, simultaneous_pair(psi), 10_000, seed=4, bins=bins)
    assert hist.n_outside == 0
    occupied = hist.centers[hist.counts > 0]
    assert np.all(np.abs(occupied) <= 0.001)


def test_ks_rejects_a_shifted_density(ideal_detector):
    pattern = PhotonArrivalPattern.simultaneous(1)
    grid = TimeGrid.from_step(0.0, 20.0, 0.002)
    hist = simulate_firing(ideal_detector, pattern, 200_000, seed=8, bins=TimeGrid(0.0, 20.0, 1001))
    right = firing_density(ideal_detector, pattern, grid)
    shifted = firing_density(ideal_detector, PhotonArrivalPattern((0.5,)), grid)
    bound = ks_bound(hist.n_in_bins)
    assert ks_distance(hist, right) < bound
    assert ks_distance(hist, shifted) > 10 * bound


@pytest.mark.parametrize("efficiency", [0.5, 1.0])
@pytest.mark.parametrize("k", [1, 2, 5])
def test_firing_checks_pass_for_each_photon_number(jitter_half, k, efficiency):
    det = DetectorModel(efficiency, jitter_half)
    grid = TimeGrid.from_step(0.0, 13.0, 0.002)
    rows = check_firing(det, PhotonArrivalPattern.simultaneous(k), grid, 1_000_000, seed=100 + k)
    assert [row["check"] for row in rows] == [f"firing_k{k}", f"no_click_k{k}"]
    assert all(row["passed"] for row in rows), rows


@pytest.mark.filterwarnings("error")
def test_pair_delays_with_missed_photons_raise_no_warnings():
    det_a = DetectorModel(0.3, TruncatedGaussian(1.0, 0.2))
    det_b = DetectorModel(0.4, TruncatedGaussian(1.0, 0.2))
    psi = GaussianAmplitude(0.0, 0.2, TimeGrid.from_step(-1.5, 1.5, 0.01))
    hist = simulate_pair_delays(det_a, det_b, simultaneous_pair(psi), 20_000, seed=6,
                                bins=TimeGrid.symmetric(2.0, 0.01))
    assert hist.n_no_click > 0
    assert hist.n_recorded + hist.n_no_click == hist.n_trials
