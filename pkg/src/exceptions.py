"""
Exception hierarchy for the jitter POVM library.

Library code raises these; only the command-line front end turns them
into exit codes.
"""

from typing import Optional, Tuple


class JitterPovmError(Exception):
    """Base class for every error raised by this package."""
    pass


class ParameterError(JitterPovmError, ValueError):
    """Raised when a model parameter violates its type invariant."""
    pass


class DomainError(JitterPovmError, ValueError):
    """Raised when an operation is evaluated outside its domain."""
    pass


class CoverageError(DomainError):
    """Raised when a time grid does not cover a required support."""

    def __init__(self, message: str, required: Tuple[float, float], actual: Tuple[float, float]):
        self.required = (float(required[0]), float(required[1]))
        self.actual = (float(actual[0]), float(actual[1]))
        super().__init__(
            f"{message}: grid spans [{self.actual[0]:.6g}, {self.actual[1]:.6g}] "
            f"but [{self.required[0]:.6g}, {self.required[1]:.6g}] is required"
        )


class ImpossibleHeraldError(DomainError):
    """Raised when a herald time has zero probability density for the given state."""

    def __init__(self, herald_time: float):
        self.herald_time = float(herald_time)
        super().__init__(
            f"Herald at T={self.herald_time:.6g} is impossible: "
            "no emission time is compatible with the wavepacket and causality."
        )


class InsufficientStatisticsError(JitterPovmError, RuntimeError):
    """Raised when a conditioned simulation keeps no trial at all."""

    def __init__(self, n_trials: int, n_conditioned: int):
        self.n_trials = int(n_trials)
        self.n_conditioned = int(n_conditioned)
        super().__init__(
            f"Conditioning kept {self.n_conditioned} of {self.n_trials} trials; "
            "widen the herald window or run more trials."
        )


class ConfigError(JitterPovmError, ValueError):
    """Raised for malformed scenario configurations."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        self.field = field
        self.line = line
        location = ""
        if line is not None:
            location += f"line {line}: "
        if field is not None:
            location += f"{field}: "
        super().__init__(location + message)
