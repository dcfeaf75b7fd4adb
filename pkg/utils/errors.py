"""
Exception hierarchy for the simulation library.

Every error derives from PNRSimError and from the closest builtin, so callers
can catch either the library type or e.g. ValueError.
"""

from typing import List, Optional


class PNRSimError(Exception):
    """Base class for all simulation errors."""


class DomainError(PNRSimError, ValueError):
    """Argument outside the domain of an operation."""


class UnsupportedError(PNRSimError, ValueError):
    """Requested family, photon number or dimension is not supported."""


class UnsupportedDimensionError(UnsupportedError):
    """Integration or scattering dimension above the configured maximum."""


class UnsupportedSourceError(UnsupportedError):
    """Pulse family has no shaped-cavity source realization."""


class IllConditionedInputError(DomainError):
    """Wavepacket overlaps do not form a valid Gram matrix."""


class ScatteringMisuseError(PNRSimError, ValueError):
    """Scattering element evaluated on a delta support without declaring the collapse."""


class ChannelMismatchError(DomainError):
    """SLH triples with different channel counts or Hilbert layouts."""


class DegenerateNetworkError(DomainError):
    """Network without any emitter."""


class DimensionCapError(PNRSimError):
    """Composed Hilbert space larger than the configured cap."""


class QuadratureConvergenceError(PNRSimError, RuntimeError):
    """Adaptive quadrature stopped before meeting its tolerance."""

    def __init__(self, message: str, estimate: complex, error_estimate: float):
        super().__init__(f"{message} (estimate={estimate}, error={error_estimate:.3e})")
        self.estimate = estimate
        self.error_estimate = error_estimate


class NumericalInstabilityError(PNRSimError, ArithmeticError):
    """NaN or overflow during propagation."""


class DegenerateStateError(PNRSimError, ArithmeticError):
    """Correlator normalization too small to form a ratio."""


class ResolutionError(PNRSimError, RuntimeError):
    """Time step too coarse for jump detection."""


class BisectionMisuseError(PNRSimError, ValueError):
    """Jump-time bisection called on a step without a threshold crossing."""


class InsufficientStatisticsError(PNRSimError):
    """Too few post-selected trajectories for an estimate."""


class ConfigError(PNRSimError, ValueError):
    """Experiment configuration rejected; carries line/field diagnostics."""

    def __init__(self, diagnostics: List[str], source: Optional[str] = None):
        self.diagnostics = list(diagnostics)
        self.source = source
        where = f" in {source}" if source else ""
        super().__init__(f"{len(self.diagnostics)} configuration problem(s){where}: " + "; ".join(self.diagnostics))
