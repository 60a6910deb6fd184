"""
Detector response functions: the delay density between photon arrival and click.

Every distribution is causal (no mass below zero), normalized to one, and carries
its exact pdf, cdf, quantile and a sampler. Efficiency is kept out of these
densities; it lives on the detector model.
"""

import logging
import math
from dataclasses import dataclass
from typing import ClassVar, Optional, Tuple, Union

import numpy as np
from scipy import stats

from src.exceptions import ParameterError

logger = logging.getLogger(__name__)

# Mass left beyond the upper support cutoff of unbounded distributions.
TAIL_MASS = 1e-8
# Smooth densities whose std spans fewer grid steps than this are integrated cell by cell.
RESOLVED_STD_STEPS = 4.0

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class JitterDistribution:
    """Base class; subclasses describe one family of causal delay densities."""

    kind: ClassVar[str] = "abstract"
    bounded: ClassVar[bool] = True
    # False for families with jumps in the density.
    smooth: ClassVar[bool] = True

    def __post_init__(self):
        self._validate()
        object.__setattr__(self, "_dist", self._build())

    def _validate(self) -> None:
        raise NotImplementedError

    def _build(self):
        raise NotImplementedError

    def pdf(self, tau: ArrayLike) -> ArrayLike:
        tau = np.asarray(tau, dtype=float)
        out = np.where(tau < 0, 0.0, self._dist.pdf(np.maximum(tau, 0.0)))
        return float(out) if out.ndim == 0 else out

    def cdf(self, tau: ArrayLike) -> ArrayLike:
        tau = np.asarray(tau, dtype=float)
        out = np.where(tau < 0, 0.0, self._dist.cdf(np.maximum(tau, 0.0)))
        return float(out) if out.ndim == 0 else out

    def resolved_by(self, dt: float) -> bool:
        """True when point samples of the pdf on a step-dt lattice integrate correctly."""
        return self.smooth and self.std >= RESOLVED_STD_STEPS * dt

    def lattice_pdf(self, tau: ArrayLike, dt: float) -> ArrayLike:
        """
        Density for quadrature on a lattice of step dt. Unresolved jitters are
        replaced by their average over the cell [tau - dt/2, tau + dt/2], so the
        lattice sum keeps the exact mass however narrow the support is.
        """
        if self.resolved_by(dt):
            return self.pdf(tau)
        tau = np.asarray(tau, dtype=float)
        out = (self.cdf(tau + 0.5 * dt) - self.cdf(tau - 0.5 * dt)) / dt
        return float(out) if np.ndim(out) == 0 else out

    def quantile(self, q: ArrayLike) -> ArrayLike:
        out = self._dist.ppf(q)
        return float(out) if np.ndim(out) == 0 else out

    def sample(self, rng: np.random.Generator, size=None) -> ArrayLike:
        return self._dist.rvs(size=size, random_state=rng)

    @property
    def mean(self) -> float:
        return float(self._dist.mean())

    @property
    def std(self) -> float:
        return float(self._dist.std())

    @property
    def support(self) -> Tuple[float, float]:
        """Interval holding all the mass, or all but TAIL_MASS for unbounded families."""
        lo = max(float(self._dist.support()[0]), 0.0)
        if self.bounded:
            return lo, float(self._dist.support()[1])
        return lo, float(self._dist.isf(TAIL_MASS))

    @property
    def tail_mass(self) -> float:
        return 0.0 if self.bounded else TAIL_MASS


@dataclass(frozen=True)
class LogNormal(JitterDistribution):
    """Log-normal delay; mu and sigma are the location and scale of log(tau)."""

    mu: float
    sigma: float

    kind: ClassVar[str] = "lognormal"
    bounded: ClassVar[bool] = False

    def _validate(self):
        if not math.isfinite(self.mu):
            raise ParameterError(f"LogNormal location must be finite, got {self.mu}.")
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ParameterError(f"LogNormal scale must be positive, got {self.sigma}.")

    def _build(self):
        return stats.lognorm(s=self.sigma, scale=math.exp(self.mu))


@dataclass(frozen=True)
class TruncatedGaussian(JitterDistribution):
    """Gaussian(mean, std) restricted to tau >= 0 and renormalized."""

    mean_param: float
    std_param: float

    kind: ClassVar[str] = "truncated_gaussian"
    bounded: ClassVar[bool] = False

    def _validate(self):
        if not math.isfinite(self.mean_param):
            raise ParameterError(f"TruncatedGaussian mean must be finite, got {self.mean_param}.")
        if not (self.std_param > 0 and math.isfinite(self.std_param)):
            raise ParameterError(f"TruncatedGaussian std must be positive, got {self.std_param}.")

    def _build(self):
        a = (0.0 - self.mean_param) / self.std_param
        return stats.truncnorm(a=a, b=np.inf, loc=self.mean_param, scale=self.std_param)


@dataclass(frozen=True)
class Rectangular(JitterDistribution):
    """Uniform delay on [a, b] with 0 <= a < b."""

    a: float
    b: float

    kind: ClassVar[str] = "rectangular"
    smooth: ClassVar[bool] = False

    def _validate(self):
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ParameterError(f"Rectangular bounds must be finite, got [{self.a}, {self.b}].")
        if self.a < 0:
            raise ParameterError(f"Rectangular jitter must be causal (a >= 0), got a={self.a}.")
        if not self.b > self.a:
            raise ParameterError(f"Rectangular jitter needs b > a, got [{self.a}, {self.b}].")

    def _build(self):
        return stats.uniform(loc=self.a, scale=self.b - self.a)


@dataclass(frozen=True)
class NearDelta(JitterDistribution):
    """
    Narrow uniform delay on [center - halfwidth, center + halfwidth], clipped at 0.
    Stands in for a jitter-free detector with constant delay `center`.
    """

    center: float
    halfwidth: float

    kind: ClassVar[str] = "near_delta"
    smooth: ClassVar[bool] = False

    def _validate(self):
        if not (self.center >= 0 and math.isfinite(self.center)):
            raise ParameterError(f"NearDelta center must be >= 0, got {self.center}.")
        if not (self.halfwidth > 0 and math.isfinite(self.halfwidth)):
            raise ParameterError(f"NearDelta halfwidth must be positive, got {self.halfwidth}.")

    def _build(self):
        lo = max(self.center - self.halfwidth, 0.0)
        return stats.uniform(loc=lo, scale=self.center + self.halfwidth - lo)


def pdf(d: JitterDistribution, tau: ArrayLike) -> ArrayLike:
    return d.pdf(tau)


def cdf(d: JitterDistribution, tau: ArrayLike) -> ArrayLike:
    return d.cdf(tau)


def sample(d: JitterDistribution, stream: np.random.Generator, size=None) -> ArrayLike:
    return d.sample(stream, size)


def lognormal_from_moments(mean: float, std: float) -> LogNormal:
    """
    Log-normal jitter with the given mean and standard deviation of the delay.

    sigma^2 = ln(1 + std^2 / mean^2), mu = ln(mean) - sigma^2 / 2
    """
    if not (mean > 0 and math.isfinite(mean)):
        raise ParameterError(f"Log-normal mean must be positive, got {mean}.")
    if not (std > 0 and math.isfinite(std)):
        raise ParameterError(f"Log-normal std must be positive, got {std}.")
    sigma2 = math.log1p((std / mean) ** 2)
    return LogNormal(mu=math.log(mean) - 0.5 * sigma2, sigma=math.sqrt(sigma2))


def build_jitter(kind: str, mean: Optional[float] = None, std: Optional[float] = None,
                 low: Optional[float] = None, high: Optional[float] = None,
                 center: Optional[float] = None, halfwidth: Optional[float] = None) -> JitterDistribution:
    """Construct a jitter from a family name and its parameters (used by scenario configs)."""
    kind = kind.lower()
    if kind == LogNormal.kind:
        return lognormal_from_moments(mean, std)
    if kind == TruncatedGaussian.kind:
        return TruncatedGaussian(mean, std)
    if kind == Rectangular.kind:
        return Rectangular(low, high)
    if kind == NearDelta.kind:
        return NearDelta(center, halfwidth)
    raise ParameterError(
        f"Unknown jitter kind '{kind}'. Expected one of: "
        f"{LogNormal.kind}, {TruncatedGaussian.kind}, {Rectangular.kind}, {NearDelta.kind}."
    )
