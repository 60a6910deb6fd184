"""
Two-detector coincidences: joint firing densities over (T_A, T_B) and the
start-stop delay density of Delta = T_B - T_A.

Two routes lead to the delay density of a factorized pair state:
  * joint_firing_density followed by delay_density (general, two-dimensional);
  * delay_density_factorized, which only needs |chi|^2 and the detectors'
    response cross-correlation; the pair envelope psi drops out.
On aligned lattices with the same step both give the same numbers.
"""

import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, List, Optional

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from scipy.interpolate import RegularGridInterpolator

from src.analysis.distributions import JitterDistribution
from src.analysis.povm import DetectorModel
from src.analysis.states import FactorizedJointAmplitude, JointTemporalAmplitude, SampledJointAmplitude
from src.analysis.timegrid import (
    NEGATIVE_ROUNDING_TOL,
    DensityOverDelay,
    DensityOverTime,
    TimeGrid,
    trapezoid_weights,
)
from src.exceptions import DomainError

logger = logging.getLogger(__name__)

# Upper bound on matrix elements held at once when tabulating correlations.
BLOCK_ELEMENTS = 2_000_000


def truncated_pdf(jitter: JitterDistribution, tau, dt: Optional[float] = None) -> np.ndarray:
    """
    Jitter density with the tail beyond its support cutoff set to zero. With a
    lattice step dt, unresolved jitters are cell-averaged (see lattice_pdf) and
    a cell is kept while any part of it lies below the cutoff.
    """
    tau = np.asarray(tau, dtype=float)
    if dt is None:
        return np.where(tau > jitter.support[1], 0.0, jitter.pdf(tau))
    cutoff = jitter.support[1] + (0.0 if jitter.resolved_by(dt) else 0.5 * dt)
    return np.where(tau > cutoff, 0.0, jitter.lattice_pdf(tau, dt))


@dataclass(frozen=True, eq=False)
class JointFiringDensity:
    """Density of the click pair (T_A, T_B); values[i, j] sits at (grid_a[i], grid_b[j])."""

    grid_a: TimeGrid
    grid_b: TimeGrid
    values: np.ndarray

    def __post_init__(self):
        vals = np.array(self.values, dtype=float)
        expected = (self.grid_a.n_points, self.grid_b.n_points)
        if vals.shape != expected:
            raise DomainError(f"Expected joint density of shape {expected}, got {vals.shape}.")
        if vals.size and vals.min() < -NEGATIVE_ROUNDING_TOL:
            raise DomainError(f"Joint density must be nonnegative, min is {vals.min():.3e}.")
        vals = np.clip(vals, 0.0, None)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @cached_property
    def mass(self) -> float:
        return float(trapezoid_weights(self.grid_a) @ self.values @ trapezoid_weights(self.grid_b))

    def marginal_a(self) -> DensityOverTime:
        return DensityOverTime(self.grid_a, self.values @ trapezoid_weights(self.grid_b))

    def marginal_b(self) -> DensityOverTime:
        return DensityOverTime(self.grid_b, trapezoid_weights(self.grid_a) @ self.values)

    def to_frame(self) -> pd.DataFrame:
        """Long format with columns T_a, T_b, p."""
        t_a, t_b = np.meshgrid(self.grid_a.points, self.grid_b.points, indexing="ij")
        return pd.DataFrame({"T_a": t_a.ravel(), "T_b": t_b.ravel(), "p": self.values.ravel()})


def _response_matrix(jitter: JitterDistribution, out_grid: TimeGrid, in_grid: TimeGrid) -> np.ndarray:
    """K[i, a] = jitter(T_i - t_a) * w_a, so that K @ f integrates over emission times."""
    lags = out_grid.points[:, None] - in_grid.points[None, :]
    return truncated_pdf(jitter, lags, in_grid.dt) * trapezoid_weights(in_grid)[None, :]


def joint_firing_density(det_a: DetectorModel, det_b: DetectorModel, phi: JointTemporalAmplitude,
                         grid_a: TimeGrid, grid_b: TimeGrid) -> JointFiringDensity:
    """
    eta_A * eta_B * double integral of jitter_A(T_A - t_A) jitter_B(T_B - t_B) |phi(t_A, t_B)|^2.

    Factorized amplitudes are integrated on the output grids; sampled ones on
    their own grids. The pair intensity is renormalized by its quadrature mass
    first, so a delta-like chi narrower than the grid step still carries one photon.
    """
    if isinstance(phi, SampledJointAmplitude):
        in_a, in_b = phi.grid_a, phi.grid_b
        pair_intensity = phi.intensity
    elif isinstance(phi, FactorizedJointAmplitude):
        in_a, in_b = grid_a, grid_b
        pair_intensity = phi.intensity_at(grid_a.points[:, None], grid_b.points[None, :])
    else:
        raise DomainError(f"Unsupported joint amplitude type {type(phi).__name__}.")

    (a_lo, a_hi), (b_lo, b_hi) = phi.support_a, phi.support_b
    grid_a.require_coverage(a_lo, a_hi + det_a.jitter.support[1], "arm A emission plus jitter support")
    grid_b.require_coverage(b_lo, b_hi + det_b.jitter.support[1], "arm B emission plus jitter support")

    norm = float(trapezoid_weights(in_a) @ pair_intensity @ trapezoid_weights(in_b))
    if not norm > 0:
        raise DomainError("Joint intensity has zero mass on the integration grids.")
    if abs(norm - 1.0) > 1e-6:
        logger.debug("Joint intensity quadrature mass %.6g renormalized to 1.", norm)

    k_a = _response_matrix(det_a.jitter, grid_a, in_a)
    k_b = _response_matrix(det_b.jitter, grid_b, in_b)
    values = det_a.efficiency * det_b.efficiency * (k_a @ (pair_intensity / norm) @ k_b.T)
    joint = JointFiringDensity(grid_a, grid_b, values)
    logger.info("Joint firing density on %dx%d grid, mass %.6f.", grid_a.n_points, grid_b.n_points, joint.mass)
    return joint


def _diagonal_integrals(values: np.ndarray, offsets: np.ndarray, dt: float) -> np.ndarray:
    out = np.empty(len(offsets))
    for n, offset in enumerate(offsets):
        diag = np.diagonal(values, offset=int(offset))
        out[n] = dt * (diag.sum() - 0.5 * (diag[0] + diag[-1])) if diag.size > 1 else 0.0
    return out


def _interpolated_integrals(interp: RegularGridInterpolator, t_a: np.ndarray, weights: np.ndarray,
                            delays: np.ndarray) -> np.ndarray:
    out = np.empty(len(delays))
    for n, delta in enumerate(delays):
        pts = np.stack([t_a, t_a + delta], axis=-1)
        out[n] = float(weights @ interp(pts))
    return out


def _split(items: np.ndarray, n_jobs: int) -> List[np.ndarray]:
    n_chunks = max(1, min(len(items), abs(n_jobs) if n_jobs not in (0, -1) else 8))
    return [c for c in np.array_split(items, n_chunks) if len(c)]


def delay_density(joint: JointFiringDensity, delay_grid: Optional[TimeGrid] = None,
                  n_jobs: int = 1) -> DensityOverDelay:
    """
    p(Delta) = integral over T of p(T, T + Delta).

    When both click grids share one lattice the integral runs along matrix
    diagonals with no interpolation; otherwise the joint density is linearly
    interpolated along each line. Each Delta is summed on its own, so the
    result does not depend on n_jobs.
    """
    ga, gb = joint.grid_a, joint.grid_b
    if ga.is_aligned_with(gb):
        dt = ga.dt
        offsets = np.arange(-(ga.n_points - 1), gb.n_points)
        chunks = _split(offsets, n_jobs)
        parts = Parallel(n_jobs=n_jobs)(delayed(_diagonal_integrals)(joint.values, c, dt) for c in chunks)
        values = np.concatenate(parts)
        base = gb.t_min - ga.t_min
        lattice = TimeGrid(base + offsets[0] * dt, base + offsets[-1] * dt, len(offsets))
        if delay_grid is None:
            return DensityOverDelay(lattice, values)
        if not delay_grid.is_aligned_with(lattice):
            logger.warning("Delay grid is off the click-time lattice; interpolating the diagonal sums.")
        return DensityOverDelay(delay_grid, np.interp(delay_grid.points, lattice.points, values, left=0.0, right=0.0))

    if delay_grid is None:
        dt = min(ga.dt, gb.dt)
        half_width = max(abs(gb.t_max - ga.t_min), abs(gb.t_min - ga.t_max))
        delay_grid = TimeGrid.symmetric(half_width, dt)
    logger.debug("Click grids are not aligned; integrating the joint density by interpolation.")
    interp = RegularGridInterpolator((ga.points, gb.points), joint.values, method="linear",
                                     bounds_error=False, fill_value=0.0)
    chunks = _split(delay_grid.points, n_jobs)
    parts = Parallel(n_jobs=n_jobs)(
        delayed(_interpolated_integrals)(interp, ga.points, trapezoid_weights(ga), c) for c in chunks
    )
    return DensityOverDelay(delay_grid, np.concatenate(parts))


def _correlation_at(jitter_a: JitterDistribution, jitter_b: JitterDistribution,
                    delays: np.ndarray, dt: float) -> np.ndarray:
    # Sum over the lattice tau = 0, dt, 2dt, ... reaching past the cutoff of jitter_a.
    # Both factors vanish outside their supports, so shifting the lattice by a
    # whole number of steps leaves the sum unchanged (exact exchange symmetry).
    tau = np.arange(int(math.ceil(jitter_a.support[1] / dt)) + 1) * dt
    theta_a = truncated_pdf(jitter_a, tau, dt)
    keep = theta_a > 0
    tau, theta_a = tau[keep], theta_a[keep]
    rows = max(1, BLOCK_ELEMENTS // max(len(tau), 1))
    out = np.empty(len(delays))
    for start in range(0, len(delays), rows):
        block = delays[start:start + rows]
        theta_b = truncated_pdf(jitter_b, tau[None, :] + block[:, None], dt)
        out[start:start + rows] = dt * (theta_b @ theta_a)
    return out


def cross_correlation(jitter_a: JitterDistribution, jitter_b: JitterDistribution,
                      delay_grid: TimeGrid) -> np.ndarray:
    """C(Delta) = integral jitter_A(tau) jitter_B(tau + Delta) dtau on the delay grid's step."""
    return _correlation_at(jitter_a, jitter_b, delay_grid.points, delay_grid.dt)


def default_delay_grid(det_a: DetectorModel, det_b: DetectorModel, dt: float,
                       chi_intensity: Optional[DensityOverDelay] = None) -> TimeGrid:
    """[-W, W] with W the sum of both jitter cutoffs and the radius of |chi|^2's support."""
    half_width = det_a.jitter.support[1] + det_b.jitter.support[1]
    if chi_intensity is not None:
        nonzero = chi_intensity.points[chi_intensity.values > 0]
        if nonzero.size:
            half_width += float(np.max(np.abs(nonzero)))
    return TimeGrid.symmetric(half_width, dt)


def delay_density_factorized(det_a: DetectorModel, det_b: DetectorModel,
                             chi_intensity: Optional[DensityOverDelay] = None,
                             delay_grid: Optional[TimeGrid] = None) -> DensityOverDelay:
    """
    eta_A * eta_B * integral |chi(tbar)|^2 C(Delta - tbar) dtbar.

    chi_intensity=None stands for simultaneous pairs (|chi|^2 a point mass at 0),
    which leaves the bare cross-correlation of the two responses.
    """
    if delay_grid is None:
        if chi_intensity is None:
            raise DomainError("Simultaneous pairs need an explicit delay grid (see default_delay_grid).")
        delay_grid = default_delay_grid(det_a, det_b, chi_intensity.grid.dt, chi_intensity)
    eta2 = det_a.efficiency * det_b.efficiency
    dt = delay_grid.dt
    delays = delay_grid.points

    if chi_intensity is None:
        return DensityOverDelay(delay_grid, eta2 * _correlation_at(det_a.jitter, det_b.jitter, delays, dt))

    chi = chi_intensity.normalized()
    if not chi.grid.is_aligned_with(delay_grid):
        logger.warning("chi grid step %.4g differs from delay step %.4g; correlation will be interpolated.",
                       chi.grid.dt, dt)
    weights = trapezoid_weights(chi.grid) * chi.values
    nonzero = weights > 0
    tbar, weights = chi.points[nonzero], weights[nonzero]

    u_lo = delays[0] - tbar[-1]
    n_u = int(round((delays[-1] - tbar[0] - u_lo) / dt)) + 1
    u = u_lo + np.arange(n_u) * dt
    corr = _correlation_at(det_a.jitter, det_b.jitter, u, dt)

    values = np.empty(len(delays))
    rows = max(1, BLOCK_ELEMENTS // len(tbar))
    for start in range(0, len(delays), rows):
        block = delays[start:start + rows]
        shifted = np.interp(block[:, None] - tbar[None, :], u, corr, left=0.0, right=0.0)
        values[start:start + rows] = shifted @ weights
    return DensityOverDelay(delay_grid, eta2 * values)


def full_width_half_maximum(p: DensityOverDelay) -> float:
    """Width between the outermost half-maximum crossings, linearly interpolated."""
    v, x = p.values, p.points
    half = 0.5 * v.max()
    above = np.flatnonzero(v >= half)
    i0, i1 = above[0], above[-1]
    left = x[i0]
    if i0 > 0 and v[i0] != v[i0 - 1]:
        left = x[i0 - 1] + (half - v[i0 - 1]) / (v[i0] - v[i0 - 1]) * (x[i0] - x[i0 - 1])
    right = x[i1]
    if i1 < len(v) - 1 and v[i1] != v[i1 + 1]:
        right = x[i1] + (v[i1] - half) / (v[i1] - v[i1 + 1]) * (x[i1 + 1] - x[i1])
    return float(right - left)


def peak_statistics(p: DensityOverDelay) -> Dict[str, float]:
    """Mode, mean, std and FWHM of the normalized delay density."""
    if not p.mass > 0:
        raise DomainError("Peak statistics are undefined for a zero-mass delay density.")
    mean, std = p.moments()
    return {"mode": p.mode(), "mean": mean, "std": std, "fwhm": full_width_half_maximum(p)}
