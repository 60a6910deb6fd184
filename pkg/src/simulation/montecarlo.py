"""
Event-level Monte Carlo of ON/OFF detection with timing jitter.

The simulator follows the physical story photon by photon: each photon is
detected with probability eta, a detected photon clicks after a sampled jitter
delay, and the detector keeps only its first click. Histograms from here are
the independent reference for the analytic densities.

Randomness is counter-based: trials are cut into fixed-size chunks and chunk c
draws from Philox keyed by (seed, c). Chunks run in any order or on any number
of workers and are merged in chunk order, so results depend only on the seed
and the number of trials.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np
from joblib import Parallel, delayed

from src.analysis.povm import DetectorModel, PhotonArrivalPattern
from src.analysis.timegrid import SampledDensity, TimeGrid
from src.exceptions import DomainError, InsufficientStatisticsError, ParameterError

logger = logging.getLogger(__name__)

CHUNK_SIZE = 65_536
DEFAULT_BINS = 1_000
KS_CONFIDENCE = 3.0

PairSampler = Callable[[np.random.Generator, int], Tuple[np.ndarray, np.ndarray]]
TimeSampler = Callable[[np.random.Generator, int], np.ndarray]


@dataclass(frozen=True, eq=False)
class ClickHistogram:
    """
    Counts of recorded values in uniform bins.

    Every trial lands in exactly one place: a bin, n_outside (recorded but
    beyond the edges) or n_no_click (nothing recorded).
    """

    edges: np.ndarray
    counts: np.ndarray
    n_trials: int
    n_no_click: int
    n_outside: int = 0

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        counts = np.asarray(self.counts, dtype=np.int64)
        if edges.ndim != 1 or counts.shape != (edges.size - 1,):
            raise DomainError(f"{edges.size} edges need {edges.size - 1} counts, got shape {counts.shape}.")
        steps = np.diff(edges)
        if not np.allclose(steps, steps[0], rtol=1e-9, atol=0.0):
            raise DomainError("Histogram bins must be uniform.")
        if counts.sum() + self.n_no_click + self.n_outside != self.n_trials:
            raise DomainError(
                f"Histogram does not account for every trial: {counts.sum()} + {self.n_no_click} "
                f"+ {self.n_outside} != {self.n_trials}."
            )
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "counts", counts)

    @property
    def n_recorded(self) -> int:
        return int(self.counts.sum()) + self.n_outside

    @property
    def n_in_bins(self) -> int:
        return int(self.counts.sum())

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    def density(self) -> np.ndarray:
        """Counts per trial per unit time, comparable to an unnormalized analytic density."""
        return self.counts / (self.n_trials * self.bin_width)

    def mean(self) -> float:
        if self.n_in_bins == 0:
            raise DomainError("Empty histogram has no mean.")
        return float(self.centers @ self.counts / self.n_in_bins)

    def __add__(self, other: "ClickHistogram") -> "ClickHistogram":
        if not np.array_equal(self.edges, other.edges):
            raise DomainError("Only histograms with identical edges can be merged.")
        return ClickHistogram(
            self.edges,
            self.counts + other.counts,
            self.n_trials + other.n_trials,
            self.n_no_click + other.n_no_click,
            self.n_outside + other.n_outside,
        )


def chunk_rng(seed: int, chunk_index: int) -> np.random.Generator:
    """Independent stream for one chunk of trials."""
    return np.random.Generator(np.random.Philox(key=np.array([seed, chunk_index], dtype=np.uint64)))


def _chunk_sizes(n_trials: int) -> List[int]:
    full, rest = divmod(n_trials, CHUNK_SIZE)
    return [CHUNK_SIZE] * full + ([rest] if rest else [])


def _histogram(values: np.ndarray, edges: np.ndarray, n_trials: int) -> ClickHistogram:
    """values holds one entry per trial, +inf meaning nothing recorded."""
    recorded = values[np.isfinite(values)]
    counts, _ = np.histogram(recorded, bins=edges)
    n_in = int(counts.sum())
    return ClickHistogram(edges, counts, n_trials, n_trials - recorded.size, recorded.size - n_in)


def _run_chunks(worker, seed: int, n_trials: int, n_jobs: int, *args) -> ClickHistogram:
    if n_trials < 1:
        raise ParameterError(f"Need at least one trial, got {n_trials}.")
    if int(seed) != seed or seed < 0:
        raise ParameterError(f"Seed must be a nonnegative integer, got {seed}.")
    sizes = _chunk_sizes(int(n_trials))
    parts = Parallel(n_jobs=n_jobs)(
        delayed(worker)(chunk_rng(int(seed), index), size, *args) for index, size in enumerate(sizes)
    )
    total = parts[0]
    for part in parts[1:]:
        total = total + part
    return total


def _as_edges(bins: Union[TimeGrid, np.ndarray]) -> np.ndarray:
    if isinstance(bins, TimeGrid):
        return np.array(bins.points)
    return np.asarray(bins, dtype=float)


def _detection_times(rng: np.random.Generator, det: DetectorModel, emission: np.ndarray) -> np.ndarray:
    """Click time of each photon, +inf for photons the detector misses."""
    detected = rng.random(emission.shape) < det.efficiency
    delays = np.asarray(det.jitter.sample(rng, emission.shape), dtype=float)
    return np.where(detected, emission + delays, np.inf)


def _firing_chunk(rng, size, det, times, edges, dark_window):
    clicks = _detection_times(rng, det, np.broadcast_to(times, (size, times.size)))
    first = clicks.min(axis=1) if times.size else np.full(size, np.inf)
    if dark_window is not None and det.dark_count_rate > 0:
        lo, hi = dark_window
        dark = lo + rng.exponential(1.0 / det.dark_count_rate, size)
        first = np.minimum(first, np.where(dark <= hi, dark, np.inf))
    return _histogram(first, edges, size)


def default_firing_bins(det: DetectorModel, arrivals: PhotonArrivalPattern, n_bins: int = DEFAULT_BINS) -> TimeGrid:
    times = arrivals.times
    return TimeGrid(times.min(), times.max() + det.jitter.support[1], n_bins + 1)


def simulate_firing(det: DetectorModel, arrivals: PhotonArrivalPattern, n_trials: int, seed: int,
                    bins: Optional[Union[TimeGrid, np.ndarray]] = None,
                    dark_window: Optional[Tuple[float, float]] = None, n_jobs: int = 1) -> ClickHistogram:
    """
    Histogram of first-click times for an arrival pattern.

    dark_window=(lo, hi) adds Poisson dark clicks at the detector's rate inside
    the window; they compete with photon clicks under first-click-wins.
    """
    if arrivals.k == 0 and dark_window is None:
        raise DomainError("Simulating the vacuum needs a dark-count window.")
    if bins is None:
        if arrivals.k == 0:
            bins = TimeGrid(dark_window[0], dark_window[1], DEFAULT_BINS + 1)
        else:
            bins = default_firing_bins(det, arrivals)
    hist = _run_chunks(_firing_chunk, seed, n_trials, n_jobs, det, arrivals.times, _as_edges(bins), dark_window)
    logger.info("Simulated %d trials of %d photon(s): %d without click.", hist.n_trials, arrivals.k, hist.n_no_click)
    return hist


def _pair_chunk(rng, size, det_a, det_b, pair_sampler, edges):
    t_a, t_b = pair_sampler(rng, size)
    click_a = _detection_times(rng, det_a, np.asarray(t_a, dtype=float))
    click_b = _detection_times(rng, det_b, np.asarray(t_b, dtype=float))
    both = np.isfinite(click_a) & np.isfinite(click_b)
    delays = np.full(both.shape, np.inf)
    delays[both] = click_b[both] - click_a[both]
    return _histogram(delays, edges, size)


def simulate_pair_delays(det_a: DetectorModel, det_b: DetectorModel, pair_sampler: PairSampler,
                         n_trials: int, seed: int, bins: Union[TimeGrid, np.ndarray],
                         n_jobs: int = 1) -> ClickHistogram:
    """
    Histogram of Delta = T_B - T_A over trials where both arms click.
    pair_sampler(rng, size) returns emission times (t_A, t_B) and must be picklable.
    """
    hist = _run_chunks(_pair_chunk, seed, n_trials, n_jobs, det_a, det_b, pair_sampler, _as_edges(bins))
    logger.info("Simulated %d pairs: %d coincidences.", hist.n_trials, hist.n_recorded)
    return hist


def _herald_chunk(rng, size, det_b, sampler, herald_time, half_window, edges):
    t = np.asarray(sampler(rng, size), dtype=float)
    click = _detection_times(rng, det_b, t)
    kept = np.abs(click - herald_time) <= half_window
    return _histogram(np.where(kept, t, np.inf), edges, size)


def simulate_heralded(det_b: DetectorModel, sampler: TimeSampler, herald_time: float, window: float,
                      n_trials: int, seed: int, bins: Union[TimeGrid, np.ndarray],
                      n_jobs: int = 1) -> ClickHistogram:
    """
    Histogram of emission times t among trials whose herald click falls within
    window/2 of herald_time. Rejected trials count as n_no_click.

    Raises:
        InsufficientStatisticsError: no trial passed the conditioning.
    """
    if not window > 0:
        raise ParameterError(f"Herald window must be positive, got {window}.")
    hist = _run_chunks(_herald_chunk, seed, n_trials, n_jobs, det_b, sampler, float(herald_time),
                       0.5 * window, _as_edges(bins))
    if hist.n_recorded == 0:
        raise InsufficientStatisticsError(hist.n_trials, 0)
    logger.info("Heralding at T=%.4g kept %d of %d trials.", herald_time, hist.n_recorded, hist.n_trials)
    return hist


def ks_distance(hist: ClickHistogram, p: SampledDensity) -> float:
    """
    Largest gap between the empirical cdf of the binned values and the analytic
    cdf of p restricted to the histogram range, both evaluated at the edges.
    """
    if hist.n_in_bins == 0:
        raise DomainError("KS distance of an empty histogram is undefined.")
    if not p.mass > 0:
        raise DomainError("KS distance against a zero-mass density is undefined.")
    empirical = np.concatenate(([0.0], np.cumsum(hist.counts))) / hist.n_in_bins
    analytic = np.interp(hist.edges, p.points, p.cumulative())
    span = analytic[-1] - analytic[0]
    if not span > 0:
        raise DomainError("Analytic density has no mass inside the histogram range.")
    analytic = (analytic - analytic[0]) / span
    return float(np.max(np.abs(empirical - analytic)))


def ks_bound(n_effective: int) -> float:
    return KS_CONFIDENCE / math.sqrt(n_effective)


def click_fractions(hist: ClickHistogram) -> Dict[str, float]:
    """Fraction of trials with something recorded, its complement and the binomial standard error."""
    n = hist.n_trials
    recorded = hist.n_recorded / n
    return {
        "click_fraction": recorded,
        "no_click_fraction": hist.n_no_click / n,
        "stderr": math.sqrt(max(recorded * (1.0 - recorded), 0.0) / n),
    }


def binomial_zscore(observed: float, expected: float, n_trials: int) -> float:
    """Distance of an observed fraction from its expectation in binomial standard errors."""
    sigma = math.sqrt(expected * (1.0 - expected) / n_trials)
    if sigma == 0.0:
        return 0.0 if observed == expected else math.inf
    return abs(observed - expected) / sigma
