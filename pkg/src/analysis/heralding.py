"""
Heralded single photons: the state left on arm A once arm B clicked at T.

The heralded state is diagonal in emission time with weights
w(t) = jitter(T - t) |psi(t)|^2 / integral jitter(T - t') |psi(t')|^2 dt'.
The herald efficiency cancels in w and only enters herald_time_density.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence

import numpy as np
from joblib import Parallel, delayed

from src.analysis.povm import DetectorModel, firing_density_wavepacket
from src.analysis.states import (
    FactorizedJointAmplitude,
    JointTemporalAmplitude,
    SampledJointAmplitude,
    TemporalAmplitude,
    intensity,
)
from src.analysis.timegrid import DensityOverTime, TimeGrid, trapezoid, trapezoid_weights
from src.exceptions import DomainError, ImpossibleHeraldError

logger = logging.getLogger(__name__)

# Allowed deviation of a heralded state's area from one.
UNIT_AREA_TOL = 1e-6


@dataclass(frozen=True, eq=False)
class DiagonalTemporalState(DensityOverTime):
    """Diagonal density operator in the emission-time basis; values are the weights w(t)."""

    herald_time: Optional[float] = None

    def __post_init__(self):
        super().__post_init__()
        if abs(self.mass - 1.0) > UNIT_AREA_TOL:
            raise DomainError(f"Diagonal state weights must integrate to 1, got {self.mass:.8f}.")

    @property
    def weights(self) -> np.ndarray:
        return self.values


def _normalize(grid: TimeGrid, unnormalized: np.ndarray, herald_time: float) -> DiagonalTemporalState:
    z = trapezoid(unnormalized, grid)
    if not (z > 0 and np.isfinite(z)):
        raise ImpossibleHeraldError(herald_time)
    return DiagonalTemporalState(grid, unnormalized / z, herald_time=float(herald_time))


def heralded_state(det_b: DetectorModel, psi: TemporalAmplitude, herald_time: float) -> DiagonalTemporalState:
    """Heralded weights for simultaneous pairs, on psi's grid."""
    t = psi.grid.points
    unnormalized = det_b.jitter.lattice_pdf(herald_time - t, psi.grid.dt) * psi.intensity_at(t)
    state = _normalize(psi.grid, unnormalized, herald_time)
    logger.debug("Heralded state at T=%.4g: %s", herald_time, temporal_spread(state))
    return state


def heralded_state_joint(det_b: DetectorModel, phi: JointTemporalAmplitude,
                         herald_time: float) -> DiagonalTemporalState:
    """
    Heralded weights w(t_A) proportional to integral jitter_B(T - t_B) |phi(t_A, t_B)|^2 dt_B.

    For a factorized pair the inner integral runs over the relative delay on
    chi's grid; a delta-like chi gives back heralded_state.
    """
    if isinstance(phi, FactorizedJointAmplitude):
        psi, chi = phi.pair_envelope, phi.delay_amplitude
        t_a, tbar = psi.grid.points, chi.grid.points
        chi_weights = trapezoid_weights(chi.grid) * chi.intensity_at(tbar)
        response = det_b.jitter.lattice_pdf(herald_time - t_a[:, None] - tbar[None, :], chi.grid.dt)
        unnormalized = psi.intensity_at(t_a) * (response @ chi_weights)
        return _normalize(psi.grid, unnormalized, herald_time)
    if isinstance(phi, SampledJointAmplitude):
        response = det_b.jitter.lattice_pdf(herald_time - phi.grid_b.points, phi.grid_b.dt)
        response = response * trapezoid_weights(phi.grid_b)
        return _normalize(phi.grid_a, phi.intensity @ response, herald_time)
    raise DomainError(f"Unsupported joint amplitude type {type(phi).__name__}.")


def herald_time_density(det_b: DetectorModel, psi: TemporalAmplitude,
                        grid: Optional[TimeGrid] = None) -> DensityOverTime:
    """
    p(T) = eta * integral jitter(T - t) |psi(t)|^2 dt, the heralding arm's click density.
    The default grid spans psi's support shifted by the jitter support, with psi's step.
    """
    if grid is None:
        (lo, hi), (j_lo, j_hi) = psi.support, det_b.jitter.support
        grid = TimeGrid.from_step(lo + j_lo, hi + j_hi, psi.grid.dt)
    return firing_density_wavepacket(det_b, psi, grid)


def averaged_heralded_intensity(det_b: DetectorModel, psi: TemporalAmplitude,
                                herald_grid: Optional[TimeGrid] = None) -> DensityOverTime:
    """
    integral p(T) w_T(t) dT / eta over herald times; by the law of total
    probability this is the normalized |psi(t)|^2. Herald times that cannot
    occur (p(T) = 0) contribute nothing.
    """
    if det_b.efficiency == 0:
        raise DomainError("A detector with zero efficiency never heralds.")
    p = herald_time_density(det_b, psi, herald_grid)
    averaged = np.zeros(psi.grid.n_points)
    for herald_time, weight, density in zip(p.points, trapezoid_weights(p.grid), p.values):
        if density <= 0:
            continue
        try:
            state = heralded_state(det_b, psi, herald_time)
        except ImpossibleHeraldError:
            continue
        averaged += weight * density * state.weights
    return DensityOverTime(psi.grid, averaged / det_b.efficiency)


def temporal_spread(state: DiagonalTemporalState) -> Dict[str, float]:
    mean, std = state.moments()
    return {"mean": mean, "std": std}


def mean_herald_time(det_b: DetectorModel, psi: TemporalAmplitude) -> float:
    """Mean emission time of psi plus the mean jitter delay."""
    return intensity(psi).moments()[0] + det_b.jitter.mean


def herald_sweep(detectors: Sequence[DetectorModel], psi: TemporalAmplitude,
                 herald_times: Optional[Sequence[float]] = None, n_jobs: int = 1) -> List[DiagonalTemporalState]:
    """
    One heralded state per detector. Without explicit herald times each detector
    heralds at its mean click time.
    """
    if herald_times is None:
        herald_times = [mean_herald_time(det, psi) for det in detectors]
    if len(herald_times) != len(detectors):
        raise DomainError(f"Got {len(detectors)} detectors but {len(herald_times)} herald times.")
    return Parallel(n_jobs=n_jobs)(
        delayed(heralded_state)(det, psi, t) for det, t in zip(detectors, herald_times)
    )
