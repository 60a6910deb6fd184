"""
Firing-time densities of an ON/OFF detector with timing jitter.

A k-photon input with arrival times t_1..t_k produces a single click at the
earliest detected arrival (the detector is blind after its first click):

    p_on,k(T) = sum_i eta * jitter(T - t_i) * prod_{j != i} [1 - eta * Jitter(T - t_j)]

Binned ON/OFF probabilities, dark counts and extended single-photon wavepackets
are derived from these densities.
"""

import logging
import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence, Tuple

import numpy as np

from src.analysis.distributions import JitterDistribution
from src.analysis.timegrid import DensityOverTime, TimeGrid, trapezoid_weights
from src.exceptions import DomainError, ParameterError

logger = logging.getLogger(__name__)

# Above this many photons the survival products are accumulated in log space.
LOG_SPACE_THRESHOLD = 30


@dataclass(frozen=True)
class DetectorModel:
    """ON/OFF detector: efficiency, response jitter and a constant dark-count rate."""

    efficiency: float
    jitter: JitterDistribution
    dark_count_rate: float = 0.0

    def __post_init__(self):
        if not (0.0 <= self.efficiency <= 1.0):
            raise ParameterError(f"Efficiency must lie in [0, 1], got {self.efficiency}.")
        if not (self.dark_count_rate >= 0.0 and math.isfinite(self.dark_count_rate)):
            raise ParameterError(f"Dark-count rate must be >= 0, got {self.dark_count_rate}.")
        if not isinstance(self.jitter, JitterDistribution):
            raise ParameterError(f"Jitter must be a JitterDistribution, got {type(self.jitter).__name__}.")

    def with_efficiency(self, efficiency: float) -> "DetectorModel":
        return replace(self, efficiency=efficiency)


@dataclass(frozen=True)
class PhotonArrivalPattern:
    """k temporally localized photons; only the multiset of times matters."""

    arrival_times: Tuple[float, ...]

    def __post_init__(self):
        times = tuple(float(t) for t in self.arrival_times)
        if not all(math.isfinite(t) for t in times):
            raise ParameterError(f"Arrival times must be finite, got {times}.")
        object.__setattr__(self, "arrival_times", times)

    @classmethod
    def simultaneous(cls, k: int, t: float = 0.0) -> "PhotonArrivalPattern":
        return cls(tuple([t] * int(k)))

    @classmethod
    def from_groups(cls, groups: Iterable[Tuple[float, int]]) -> "PhotonArrivalPattern":
        """Pattern from (time, multiplicity) pairs, e.g. [(0.0, 2), (3.0, 1)]."""
        times = []
        for t, multiplicity in groups:
            if int(multiplicity) != multiplicity or multiplicity < 0:
                raise ParameterError(f"Multiplicity must be a nonnegative integer, got {multiplicity}.")
            times.extend([t] * int(multiplicity))
        return cls(tuple(times))

    @property
    def k(self) -> int:
        return len(self.arrival_times)

    @property
    def times(self) -> np.ndarray:
        return np.array(self.arrival_times, dtype=float)


def _require_firing_coverage(det: DetectorModel, earliest: float, latest: float, grid: TimeGrid) -> None:
    lo, hi = det.jitter.support
    grid.require_coverage(earliest, latest + hi, "arrival times plus jitter support")
    if det.jitter.tail_mass > 0:
        logger.debug("Jitter %s truncated at %.6g (dropped tail mass %.1e).", det.jitter.kind, hi, det.jitter.tail_mass)


def _exclusive_products(survival: np.ndarray) -> np.ndarray:
    """Row i of the result is the product of all rows of `survival` except row i."""
    k, n = survival.shape
    if k > LOG_SPACE_THRESHOLD:
        with np.errstate(divide="ignore"):
            logs = np.log(survival)
        zeros = np.zeros((1, n))
        prefix = np.cumsum(np.vstack([zeros, logs[:-1]]), axis=0)
        suffix = np.cumsum(np.vstack([logs[1:], zeros])[::-1], axis=0)[::-1]
        return np.exp(prefix + suffix)
    ones = np.ones((1, n))
    prefix = np.cumprod(np.vstack([ones, survival[:-1]]), axis=0)
    suffix = np.cumprod(np.vstack([survival[1:], ones])[::-1], axis=0)[::-1]
    return prefix * suffix


def _survival_factors(det: DetectorModel, lags: np.ndarray) -> np.ndarray:
    return 1.0 - det.efficiency * det.jitter.cdf(lags)


def _survival_product(factors: np.ndarray) -> np.ndarray:
    if len(factors) > LOG_SPACE_THRESHOLD:
        with np.errstate(divide="ignore"):
            return np.exp(np.sum(np.log(factors), axis=0))
    return np.prod(factors, axis=0)


def _cell_averages(survival, grid: TimeGrid) -> np.ndarray:
    """
    Firing density averaged over each grid cell, S(T - dt/2) - S(T + dt/2) over dt.
    Used for jitters the grid does not resolve; the trapezoid mass stays exact.
    """
    half = 0.5 * grid.dt
    drop = survival(grid.points - half) - survival(grid.points + half)
    return np.maximum(drop, 0.0) / grid.dt


def firing_density(det: DetectorModel, arrivals: PhotonArrivalPattern, grid: TimeGrid) -> DensityOverTime:
    """
    First-click density for an arbitrary arrival pattern (dark counts excluded).

    Raises:
        DomainError: empty pattern.
        CoverageError: grid does not reach from the first arrival to the last
            arrival plus the jitter support.
    """
    if arrivals.k == 0:
        raise DomainError("The vacuum (k = 0) has no firing density; use add_dark_counts on a zero density.")
    times = arrivals.times
    _require_firing_coverage(det, times.min(), times.max(), grid)

    if not det.jitter.resolved_by(grid.dt):
        logger.debug("Jitter %s is not resolved by step %.4g; averaging over grid cells.", det.jitter.kind, grid.dt)
        values = _cell_averages(lambda pts: _survival_product(_survival_factors(det, pts[None, :] - times[:, None])),
                                grid)
        return DensityOverTime(grid, values)

    lags = grid.points[None, :] - times[:, None]
    first = det.efficiency * det.jitter.pdf(lags)
    others = _exclusive_products(_survival_factors(det, lags))
    values = np.sum(first * others, axis=0)
    return DensityOverTime(grid, values)


def firing_density_simultaneous(det: DetectorModel, k: int, t: float, grid: TimeGrid) -> DensityOverTime:
    """k photons all arriving at t: k * eta * jitter(T - t) * [1 - eta * Jitter(T - t)]^(k - 1)."""
    if int(k) != k or k < 1:
        raise DomainError(f"Simultaneous firing density needs k >= 1, got {k}.")
    k = int(k)
    _require_firing_coverage(det, t, t, grid)

    def power(survival, n):
        if k > LOG_SPACE_THRESHOLD:
            with np.errstate(divide="ignore"):
                return np.exp(n * np.log(survival))
        return survival ** n

    if not det.jitter.resolved_by(grid.dt):
        return DensityOverTime(grid, _cell_averages(lambda pts: power(_survival_factors(det, pts - t), k), grid))

    lag = grid.points - t
    others = power(_survival_factors(det, lag), k - 1)
    values = k * det.efficiency * det.jitter.pdf(lag) * others
    return DensityOverTime(grid, values)


def firing_density_partially_simultaneous(det: DetectorModel, groups: Sequence[Tuple[float, int]],
                                          grid: TimeGrid) -> DensityOverTime:
    """Firing density for groups of simultaneous photons given as (time, multiplicity)."""
    return firing_density(det, PhotonArrivalPattern.from_groups(groups), grid)


def survival_function(det: DetectorModel, arrivals: PhotonArrivalPattern, grid: TimeGrid) -> np.ndarray:
    """Probability that no click has happened by T: prod_j [1 - eta * Jitter(T - t_j)]."""
    if arrivals.k == 0:
        return np.ones(grid.n_points)
    return _survival_product(_survival_factors(det, grid.points[None, :] - arrivals.times[:, None]))


def firing_density_wavepacket(det: DetectorModel, psi, grid: TimeGrid) -> DensityOverTime:
    """
    Click density for one photon with temporal amplitude psi:
    eta * integral jitter(T - t) |psi(t)|^2 dt, integrated on psi's own grid.
    """
    from src.analysis.states import intensity

    arrival = intensity(psi).normalized()
    lo, hi = psi.support
    _require_firing_coverage(det, lo, hi, grid)

    kernel = det.jitter.lattice_pdf(grid.points[:, None] - arrival.points[None, :], arrival.grid.dt)
    values = det.efficiency * (kernel @ (trapezoid_weights(arrival.grid) * arrival.values))
    return DensityOverTime(grid, values)


def on_probability(p: DensityOverTime) -> float:
    """Probability of any click: the quadrature mass of the firing density."""
    return p.mass


def off_probability(p: DensityOverTime) -> float:
    return 1.0 - p.mass


def binned_on_probability(p: DensityOverTime, interval: Tuple[float, float]) -> float:
    """Probability of a click with T inside [T_lo, T_hi] (clipped to the grid)."""
    lo, hi = float(interval[0]), float(interval[1])
    if not lo < hi:
        raise DomainError(f"Interval needs T_lo < T_hi, got [{lo}, {hi}].")
    return p.integrate(lo, hi)


def binned_off_probability(p: DensityOverTime, interval: Tuple[float, float]) -> float:
    return 1.0 - binned_on_probability(p, interval)


def vacuum_density(grid: TimeGrid) -> DensityOverTime:
    """Zero firing density: what an empty input produces before dark counts."""
    return DensityOverTime(grid, np.zeros(grid.n_points))


def add_dark_counts(p: DensityOverTime, det: DetectorModel) -> DensityOverTime:
    """
    Add a constant dark-click density d over the grid window.

    Additive approximation: a dark click does not blind the detector for later
    photon clicks, nor the other way round.
    """
    if det.dark_count_rate == 0.0:
        return p
    logger.warning(
        "Adding dark counts (rate %.3g) additively; dead-time interplay between dark and photon clicks is ignored.",
        det.dark_count_rate,
    )
    return DensityOverTime(p.grid, p.values + det.dark_count_rate)


def expected_on_probability(det: DetectorModel, k: int) -> float:
    """Closed form 1 - (1 - eta)^k, independent of the arrival times."""
    return 1.0 - (1.0 - det.efficiency) ** k
