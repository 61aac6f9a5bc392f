"""Exception hierarchy shared across the package."""


class NetglmError(Exception):
    """Base class for all package errors."""


class DataError(NetglmError, ValueError):
    """Invalid population data."""


class SelfLoopError(DataError):
    pass


class DuplicateEdgeError(DataError):
    pass


class UnitRangeError(DataError):
    pass


class FamilyValueError(DataError):
    """Attribute value incompatible with its declared family."""


class FormulaError(NetglmError, ValueError):
    """Formula text could not be parsed or validated.

    ``offset`` is the byte offset into the formula string at which the
    problem was detected (None for semantic errors without a location).
    """

    def __init__(self, message, offset=None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (at offset {offset})"
        super().__init__(message)


class TermError(NetglmError, ValueError):
    """Term unknown, misconfigured, or incompatible with the data."""


class ModelBindError(NetglmError, ValueError):
    """Model specification cannot be bound to the given data."""


class NumericError(NetglmError, ArithmeticError):
    """Non-finite value encountered; message names the component."""


class EstimationError(NetglmError, RuntimeError):
    """Estimation cannot proceed (nonexistence, singularity, divergence)."""

    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class OracleError(NetglmError, ValueError):
    """Exact enumeration not feasible for the requested configuration."""


class SamplerError(NetglmError, RuntimeError):
    """Sampler contract violation."""
