"""Exception types shared across the package."""


class GrwSimError(Exception):
    """Base class for all package errors."""


class ZeroStateError(GrwSimError):
    """A state vector vanished (all-zero input or norm underflow)."""


class IncompatibleStateError(GrwSimError):
    """States do not share a grid / particle list and cannot be combined."""


class EmptyProductError(GrwSimError):
    """A tensor product was requested with no factors."""


class ParameterError(GrwSimError):
    """A parameter is out of its admissible range."""


class StepTooLargeError(ParameterError):
    """Time step too large for the first-order jump sampling to be valid."""


class PartitionError(GrwSimError):
    """A determinate partition does not cover the state's support."""


class EmptyEnsembleError(GrwSimError):
    """Aggregation was requested over zero trajectory digests."""
