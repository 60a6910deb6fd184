"""
Temporal wavepackets of single photons and photon pairs.

Amplitudes are complex even though every observable here only uses |.|^2.
Closed-form shapes are normalized analytically; sampled ones are renormalized
when built and remember how far off they were.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import cached_property
from typing import Tuple

import numpy as np
from scipy import stats
from scipy.interpolate import RegularGridInterpolator

from src.analysis.distributions import TAIL_MASS
from src.analysis.timegrid import (
    DensityOverDelay,
    DensityOverTime,
    TimeGrid,
    cell_fraction,
    trapezoid,
    trapezoid_weights,
)
from src.exceptions import DomainError, ParameterError

logger = logging.getLogger(__name__)

# Largest normalization error tolerated silently when sampling an amplitude.
NORMALIZATION_WARN_TOL = 1e-6


class TemporalAmplitude:
    """Single-photon amplitude psi(t) attached to the grid it is evaluated on."""

    grid: TimeGrid

    def amplitude(self, t) -> np.ndarray:
        raise NotImplementedError

    def intensity_at(self, t) -> np.ndarray:
        return np.abs(self.amplitude(t)) ** 2

    @property
    def support(self) -> Tuple[float, float]:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray:
        """Draw emission times distributed as |psi(t)|^2."""
        raise NotImplementedError

    @cached_property
    def values(self) -> np.ndarray:
        return self.amplitude(self.grid.points)

    def _check_grid(self) -> None:
        lo, hi = self.support
        self.grid.require_coverage(lo, hi, f"{type(self).__name__} support")


@dataclass(frozen=True, eq=False)
class RectangularAmplitude(TemporalAmplitude):
    """
    Flat wavepacket of the given width centred on `center` (|psi|^2 = 1/width).

    Samples are averaged over the grid cell around each point, so the edges
    need not sit on the lattice and the quadrature norm is exactly one.
    """

    center: float
    width: float
    grid: TimeGrid
    phase: float = 0.0

    def __post_init__(self):
        if not (self.width > 0 and math.isfinite(self.width)):
            raise ParameterError(f"Rectangular amplitude width must be positive, got {self.width}.")
        self._check_grid()

    @property
    def support(self):
        return self.center - 0.5 * self.width, self.center + 0.5 * self.width

    def amplitude(self, t):
        return np.sqrt(self.intensity_at(t)) * np.exp(1j * self.phase)

    def intensity_at(self, t):
        lo, hi = self.support
        return cell_fraction(self.grid, t, lo, hi) / self.width

    def sample(self, rng, size=None):
        lo, hi = self.support
        return rng.uniform(lo, hi, size)


@dataclass(frozen=True, eq=False)
class GaussianAmplitude(TemporalAmplitude):
    """Gaussian wavepacket whose intensity is the normal density N(center, std^2)."""

    center: float
    std: float
    grid: TimeGrid
    phase: float = 0.0

    def __post_init__(self):
        if not (self.std > 0 and math.isfinite(self.std)):
            raise ParameterError(f"Gaussian amplitude std must be positive, got {self.std}.")
        self._check_grid()

    @property
    def support(self):
        z = stats.norm.isf(0.5 * TAIL_MASS)
        return self.center - z * self.std, self.center + z * self.std

    def amplitude(self, t):
        t = np.asarray(t, dtype=float)
        norm = (2.0 * math.pi * self.std ** 2) ** -0.25
        return norm * np.exp(-((t - self.center) ** 2) / (4.0 * self.std ** 2) + 1j * self.phase)

    def intensity_at(self, t):
        return stats.norm.pdf(np.asarray(t, dtype=float), loc=self.center, scale=self.std)

    def sample(self, rng, size=None):
        return rng.normal(self.center, self.std, size)


@dataclass(frozen=True, eq=False)
class SampledAmplitude(TemporalAmplitude):
    """Amplitude given by complex samples on a grid; zero outside it, linear in between."""

    grid: TimeGrid
    samples: np.ndarray
    normalization_deviation: float = field(init=False, default=0.0)

    def __post_init__(self):
        vals = np.array(self.samples, dtype=complex)
        if vals.shape != (self.grid.n_points,):
            raise DomainError(f"Expected {self.grid.n_points} amplitude samples, got shape {vals.shape}.")
        norm = trapezoid(np.abs(vals) ** 2, self.grid)
        if not norm > 0:
            raise DomainError("Sampled amplitude has zero norm.")
        deviation = norm - 1.0
        if abs(deviation) > NORMALIZATION_WARN_TOL:
            logger.warning("Sampled amplitude renormalized (norm deviated from 1 by %.3e).", deviation)
        vals = vals / math.sqrt(norm)
        vals.setflags(write=False)
        object.__setattr__(self, "samples", vals)
        object.__setattr__(self, "normalization_deviation", deviation)

    @property
    def support(self):
        nonzero = np.flatnonzero(np.abs(self.samples) > 0)
        pts = self.grid.points
        return float(pts[nonzero[0]]), float(pts[nonzero[-1]])

    def amplitude(self, t):
        t = np.asarray(t, dtype=float)
        pts = self.grid.points
        re = np.interp(t, pts, self.samples.real, left=0.0, right=0.0)
        im = np.interp(t, pts, self.samples.imag, left=0.0, right=0.0)
        return re + 1j * im

    def sample(self, rng, size=None):
        weights = trapezoid_weights(self.grid) * np.abs(self.samples) ** 2
        idx = rng.choice(self.grid.n_points, size=size, p=weights / weights.sum())
        offsets = rng.uniform(-0.5, 0.5, size) * self.grid.dt
        return np.clip(self.grid.points[idx] + offsets, self.grid.t_min, self.grid.t_max)


def intensity(psi: TemporalAmplitude) -> DensityOverTime:
    """Arrival-time density |psi(t)|^2 on psi's grid."""
    return DensityOverTime(psi.grid, psi.intensity_at(psi.grid.points))


def delay_intensity(chi: TemporalAmplitude) -> DensityOverDelay:
    """|chi(tbar)|^2 of a relative-delay amplitude, as a density over delay."""
    return DensityOverDelay(chi.grid, chi.intensity_at(chi.grid.points))


def joint_norm(values: np.ndarray, grid_a: TimeGrid, grid_b: TimeGrid) -> float:
    """Two-dimensional trapezoidal integral of |values|^2."""
    return float(trapezoid_weights(grid_a) @ (np.abs(values) ** 2) @ trapezoid_weights(grid_b))


class JointTemporalAmplitude:
    """Two-photon amplitude phi(t_A, t_B)."""

    def amplitude(self, t_a, t_b) -> np.ndarray:
        raise NotImplementedError

    def intensity_at(self, t_a, t_b) -> np.ndarray:
        return np.abs(self.amplitude(t_a, t_b)) ** 2

    @property
    def support_a(self) -> Tuple[float, float]:
        raise NotImplementedError

    @property
    def support_b(self) -> Tuple[float, float]:
        raise NotImplementedError

    def sample(self, rng: np.random.Generator, size: int) -> Tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class FactorizedJointAmplitude(JointTemporalAmplitude):
    """phi(t_A, t_B) = psi(t_A) * chi(t_B - t_A): pair envelope times relative-delay amplitude."""

    pair_envelope: TemporalAmplitude
    delay_amplitude: TemporalAmplitude

    def amplitude(self, t_a, t_b):
        t_a = np.asarray(t_a, dtype=float)
        t_b = np.asarray(t_b, dtype=float)
        return self.pair_envelope.amplitude(t_a) * self.delay_amplitude.amplitude(t_b - t_a)

    def intensity_at(self, t_a, t_b):
        t_a = np.asarray(t_a, dtype=float)
        t_b = np.asarray(t_b, dtype=float)
        return self.pair_envelope.intensity_at(t_a) * self.delay_amplitude.intensity_at(t_b - t_a)

    @property
    def support_a(self):
        return self.pair_envelope.support

    @property
    def support_b(self):
        (a_lo, a_hi), (d_lo, d_hi) = self.pair_envelope.support, self.delay_amplitude.support
        return a_lo + d_lo, a_hi + d_hi

    def sample(self, rng, size):
        t_a = self.pair_envelope.sample(rng, size)
        return t_a, t_a + self.delay_amplitude.sample(rng, size)

    def delay_intensity(self) -> DensityOverDelay:
        return delay_intensity(self.delay_amplitude)


@dataclass(frozen=True, eq=False)
class SampledJointAmplitude(JointTemporalAmplitude):
    """phi sampled on grid_a x grid_b; optionally renormalized on construction."""

    grid_a: TimeGrid
    grid_b: TimeGrid
    samples: np.ndarray
    renormalize: bool = True
    normalization_deviation: float = field(init=False, default=0.0)

    def __post_init__(self):
        vals = np.array(self.samples, dtype=complex)
        expected = (self.grid_a.n_points, self.grid_b.n_points)
        if vals.shape != expected:
            raise DomainError(f"Expected joint samples of shape {expected}, got {vals.shape}.")
        norm = joint_norm(vals, self.grid_a, self.grid_b)
        if not norm > 0:
            raise DomainError("Sampled joint amplitude has zero norm.")
        deviation = norm - 1.0
        if self.renormalize:
            if abs(deviation) > NORMALIZATION_WARN_TOL:
                logger.warning("Joint amplitude renormalized (norm deviated from 1 by %.3e).", deviation)
            vals = vals / math.sqrt(norm)
        vals.setflags(write=False)
        object.__setattr__(self, "samples", vals)
        object.__setattr__(self, "normalization_deviation", deviation)

    @cached_property
    def _interpolators(self):
        axes = (self.grid_a.points, self.grid_b.points)
        opts = dict(method="linear", bounds_error=False, fill_value=0.0)
        return RegularGridInterpolator(axes, self.samples.real, **opts), RegularGridInterpolator(axes, self.samples.imag, **opts)

    def amplitude(self, t_a, t_b):
        t_a, t_b = np.broadcast_arrays(np.asarray(t_a, dtype=float), np.asarray(t_b, dtype=float))
        pts = np.stack([t_a.ravel(), t_b.ravel()], axis=-1)
        re, im = self._interpolators
        return (re(pts) + 1j * im(pts)).reshape(t_a.shape)

    @property
    def intensity(self) -> np.ndarray:
        return np.abs(self.samples) ** 2

    def _extent(self, axis: int, grid: TimeGrid) -> Tuple[float, float]:
        nonzero = np.flatnonzero(np.any(self.intensity > 0, axis=axis))
        return float(grid.points[nonzero[0]]), float(grid.points[nonzero[-1]])

    @property
    def support_a(self):
        return self._extent(1, self.grid_a)

    @property
    def support_b(self):
        return self._extent(0, self.grid_b)

    def marginal_a(self) -> DensityOverTime:
        """Arrival density of photon A: integral of |phi|^2 over t_B."""
        return DensityOverTime(self.grid_a, self.intensity @ trapezoid_weights(self.grid_b))

    def marginal_b(self) -> DensityOverTime:
        return DensityOverTime(self.grid_b, trapezoid_weights(self.grid_a) @ self.intensity)

    def sample(self, rng, size):
        weights = np.outer(trapezoid_weights(self.grid_a), trapezoid_weights(self.grid_b)) * self.intensity
        flat = weights.ravel()
        idx = rng.choice(flat.size, size=size, p=flat / flat.sum())
        ia, ib = np.unravel_index(idx, weights.shape)
        t_a = self.grid_a.points[ia] + rng.uniform(-0.5, 0.5, size) * self.grid_a.dt
        t_b = self.grid_b.points[ib] + rng.uniform(-0.5, 0.5, size) * self.grid_b.dt
        return t_a, t_b


def expand_factorized(j: FactorizedJointAmplitude, grid_a: TimeGrid, grid_b: TimeGrid) -> SampledJointAmplitude:
    """Sample psi(t_A) * chi(t_B - t_A) on grid_a x grid_b without renormalizing."""
    if not isinstance(j, FactorizedJointAmplitude):
        raise DomainError(f"expand_factorized needs a factorized amplitude, got {type(j).__name__}.")
    grid_a.require_coverage(*j.support_a, what="pair-envelope support")
    grid_b.require_coverage(*j.support_b, what="envelope plus delay-amplitude support")
    t_a = grid_a.points[:, None]
    t_b = grid_b.points[None, :]
    samples = j.amplitude(t_a, t_b)
    expanded = SampledJointAmplitude(grid_a, grid_b, samples, renormalize=False)
    logger.debug("Expanded factorized amplitude on %dx%d grid (norm deviation %.2e).",
                 grid_a.n_points, grid_b.n_points, expanded.normalization_deviation)
    return expanded


def simultaneous_pair(psi: TemporalAmplitude) -> "SimultaneousPairSampler":
    return SimultaneousPairSampler(psi)


@dataclass(frozen=True, eq=False)
class SimultaneousPairSampler:
    """Pair sampler for perfectly simultaneous photons: t_A = t_B drawn from |psi|^2."""

    psi: TemporalAmplitude

    def __call__(self, rng, size):
        t = self.psi.sample(rng, size)
        return t, t.copy()
