"""Exception types raised by the library."""


class PhiFamilyError(Exception):
    """Base class for all library errors."""


class InconclusiveError(PhiFamilyError):
    """An integral could be certified neither finite nor divergent."""


class NumericFailure(PhiFamilyError):
    """A finite value was required but the computation could not deliver one."""


class NotInDomainError(NumericFailure):
    """The integrand defining a quantity diverges, so the quantity is undefined."""


class NotInSpaceError(NumericFailure):
    """A field does not belong to the Musielak-Orlicz space being probed."""


class NotNormalizedError(PhiFamilyError, ValueError):
    """A density or center does not have unit mass."""

    def __init__(self, message, mass=None):
        super().__init__(message)
        self.mass = mass


class UnsupportedChartError(PhiFamilyError):
    pass


class ConstructionError(PhiFamilyError, ValueError):
    """A constructive counterexample could not be built from the given inputs."""
