"""Exception types shared across the package."""


class SpectraError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(SpectraError, ValueError):
    """Vector/matrix shapes are inconsistent with the set they are applied to."""


class ContractViolation(SpectraError, ValueError):
    """A documented precondition of an operation was violated."""


class SolverFailure(SpectraError, RuntimeError):
    """The conic solver did not return a usable answer."""

    def __init__(self, message: str, status: str = "numerical_failure"):
        super().__init__(message)
        self.status = status


class ShadowFormatError(SpectraError, ValueError):
    """A serialized shadow document violates the file format."""
