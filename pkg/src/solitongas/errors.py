"""Exception types raised by the soliton-gas laboratory."""


class SolitonGasError(Exception):
    """Base class for all failures raised by this package."""


class ContractViolation(SolitonGasError, ValueError):
    """A precondition of an operation was not met by its inputs."""


class SamplingError(SolitonGasError):
    """Rejection sampling exhausted its iteration cap."""


class GeometryError(SolitonGasError):
    """A contour or domain does not fit in the upper half-plane."""


class DegenerateDressingError(SolitonGasError):
    """A dressing vector vanished (inconsistent spectral data)."""


class SolvabilityError(SolitonGasError):
    """A linear system was singular or numerically rank deficient."""

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class AccuracyError(SolitonGasError):
    """A computed quantity failed its self-consistency tolerance."""
