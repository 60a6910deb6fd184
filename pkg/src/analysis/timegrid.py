"""
Uniform time grids, trapezoidal quadrature and sampled densities.

Every integral in the library goes through the composite trapezoidal rule on a
uniform TimeGrid. Time units are whatever the caller uses.
"""

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Dict, Tuple

import numpy as np
import pandas as pd
from scipy import integrate

from src.exceptions import CoverageError, DomainError, ParameterError

logger = logging.getLogger(__name__)

# Relative slack (in grid steps) when checking that a grid covers a support.
COVERAGE_STEP_TOL = 1e-6
# Negative values smaller than this are rounding noise and get clipped to zero.
NEGATIVE_ROUNDING_TOL = 1e-14


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid t_i = t_min + i * dt, i = 0 .. n_points - 1."""

    t_min: float
    t_max: float
    n_points: int

    def __post_init__(self):
        if not (math.isfinite(self.t_min) and math.isfinite(self.t_max)):
            raise ParameterError(f"Grid bounds must be finite, got [{self.t_min}, {self.t_max}].")
        if not self.t_min < self.t_max:
            raise ParameterError(f"Grid needs t_min < t_max, got [{self.t_min}, {self.t_max}].")
        if int(self.n_points) != self.n_points or self.n_points < 2:
            raise ParameterError(f"Grid needs an integer n_points >= 2, got {self.n_points}.")
        object.__setattr__(self, "t_min", float(self.t_min))
        object.__setattr__(self, "t_max", float(self.t_max))
        object.__setattr__(self, "n_points", int(self.n_points))

    @classmethod
    def from_step(cls, t_min: float, t_max: float, dt: float) -> "TimeGrid":
        """
        Grid starting at t_min with spacing dt whose last point is the first
        one at or beyond t_max.
        """
        if dt <= 0:
            raise ParameterError(f"Grid step must be positive, got {dt}.")
        if not t_max > t_min:
            raise ParameterError(f"Grid needs t_min < t_max, got [{t_min}, {t_max}].")
        n_steps = int(math.ceil((t_max - t_min) / dt - 1e-9))
        n_steps = max(n_steps, 1)
        return cls(t_min, t_min + n_steps * dt, n_steps + 1)

    @classmethod
    def symmetric(cls, half_width: float, dt: float) -> "TimeGrid":
        """Grid on [-W, W] with 0 on a grid point; W is rounded up to a multiple of dt."""
        if half_width <= 0 or dt <= 0:
            raise ParameterError(f"Symmetric grid needs positive half width and step, got {half_width}, {dt}.")
        n_half = max(int(math.ceil(half_width / dt - 1e-9)), 1)
        return cls(-n_half * dt, n_half * dt, 2 * n_half + 1)

    @property
    def dt(self) -> float:
        return (self.t_max - self.t_min) / (self.n_points - 1)

    @cached_property
    def points(self) -> np.ndarray:
        pts = self.t_min + np.arange(self.n_points) * self.dt
        pts.setflags(write=False)
        return pts

    @property
    def bounds(self) -> Tuple[float, float]:
        return (self.t_min, self.t_max)

    def covers(self, lo: float, hi: float) -> bool:
        slack = COVERAGE_STEP_TOL * self.dt
        return self.t_min <= lo + slack and self.t_max >= hi - slack

    def require_coverage(self, lo: float, hi: float, what: str = "support") -> None:
        if not self.covers(lo, hi):
            raise CoverageError(f"Grid does not cover the {what}", (lo, hi), self.bounds)

    def is_aligned_with(self, other: "TimeGrid", rtol: float = 1e-9) -> bool:
        """True when both grids share the step and their points sit on one lattice."""
        if abs(self.dt - other.dt) > rtol * self.dt:
            return False
        offset = (other.t_min - self.t_min) / self.dt
        return abs(offset - round(offset)) < 1e-6


def trapezoid(values: np.ndarray, grid: TimeGrid) -> float:
    """Composite trapezoidal integral of grid samples."""
    return float(integrate.trapezoid(values, dx=grid.dt))


def cumulative(values: np.ndarray, grid: TimeGrid) -> np.ndarray:
    """Running trapezoidal integral, 0 at the first grid point."""
    return integrate.cumulative_trapezoid(values, dx=grid.dt, initial=0.0)


def trapezoid_weights(grid: TimeGrid) -> np.ndarray:
    """Weights w_i such that sum(w_i f_i) is the trapezoidal integral."""
    w = np.full(grid.n_points, grid.dt)
    w[0] = w[-1] = 0.5 * grid.dt
    return w


def cell_fraction(grid: TimeGrid, t, lo: float, hi: float) -> np.ndarray:
    """
    Share of the cell [t - dt/2, t + dt/2] (clipped to the grid) that lies in
    [lo, hi]. Sampling an indicator this way makes its trapezoid integral
    exactly hi - lo wherever the edges fall, and is continuous in t.
    """
    t = np.asarray(t, dtype=float)
    half = 0.5 * grid.dt
    cell_lo = np.maximum(t - half, grid.t_min)
    cell_hi = np.minimum(t + half, grid.t_max)
    length = cell_hi - cell_lo
    overlap = np.clip(np.minimum(cell_hi, hi) - np.maximum(cell_lo, lo), 0.0, None)
    return np.where(length > 0, overlap / np.where(length > 0, length, 1.0), 0.0)


def integrate_interval(values: np.ndarray, grid: TimeGrid, lo: float, hi: float) -> float:
    """
    Trapezoidal integral over [lo, hi] clipped to the grid. Interval ends that
    fall between grid points are handled by linear interpolation.
    """
    lo_c = max(lo, grid.t_min)
    hi_c = min(hi, grid.t_max)
    if hi_c <= lo_c:
        return 0.0
    pts = grid.points
    inner = (pts > lo_c) & (pts < hi_c)
    x = np.concatenate(([lo_c], pts[inner], [hi_c]))
    y = np.concatenate(([np.interp(lo_c, pts, values)], values[inner], [np.interp(hi_c, pts, values)]))
    return float(integrate.trapezoid(y, x))


@dataclass(frozen=True, eq=False)
class SampledDensity:
    """Nonnegative density sampled on a uniform grid."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        if vals.shape != (self.grid.n_points,):
            raise DomainError(f"Expected {self.grid.n_points} samples, got shape {vals.shape}.")
        if not np.all(np.isfinite(vals)):
            raise DomainError("Density samples must be finite.")
        if vals.size and vals.min() < -NEGATIVE_ROUNDING_TOL:
            raise DomainError(f"Density samples must be nonnegative, min is {vals.min():.3e}.")
        vals = np.clip(vals, 0.0, None)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def points(self) -> np.ndarray:
        return self.grid.points

    @cached_property
    def mass(self) -> float:
        return trapezoid(self.values, self.grid)

    def cumulative(self) -> np.ndarray:
        return cumulative(self.values, self.grid)

    def integrate(self, lo: float, hi: float) -> float:
        return integrate_interval(self.values, self.grid, lo, hi)

    def normalized(self):
        if self.mass <= 0:
            raise DomainError("Cannot normalize a density with zero mass.")
        return replace(self, values=self.values / self.mass)

    def moments(self) -> Tuple[float, float]:
        """Mean and standard deviation of the normalized density."""
        if self.mass <= 0:
            raise DomainError("Moments are undefined for a density with zero mass.")
        pts = self.points
        mean = trapezoid(pts * self.values, self.grid) / self.mass
        var = trapezoid((pts - mean) ** 2 * self.values, self.grid) / self.mass
        return mean, math.sqrt(max(var, 0.0))

    def mode(self) -> float:
        return float(self.points[int(np.argmax(self.values))])

    def to_frame(self, x_label: str, y_label: str) -> pd.DataFrame:
        return pd.DataFrame({x_label: self.points, y_label: self.values})


@dataclass(frozen=True, eq=False)
class DensityOverTime(SampledDensity):
    """Probability density of a click (or emission) time."""
    pass


@dataclass(frozen=True, eq=False)
class DensityOverDelay(SampledDensity):
    """Probability density of a stop-minus-start delay."""

    @property
    def delays(self) -> np.ndarray:
        return self.grid.points


def describe(density: SampledDensity) -> Dict:
    """Small summary used in log lines and reports."""
    summary = {"mass": density.mass, "mode": density.mode()}
    if density.mass > 0:
        summary["mean"], summary["std"] = density.moments()
    return summary
