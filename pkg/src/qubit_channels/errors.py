"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class ChannelError(ValueError):
    """Base class for invalid inputs to channel routines."""


class InvalidParameterError(ChannelError):
    pass


class UnphysicalStateError(ChannelError):
    pass


class NotCompletelyPositiveError(ChannelError):
    """Raised when an operation requires a CP map and the Choi matrix has a negative eigenvalue."""

    def __init__(self, min_eigenvalue: float, message: str | None = None):
        self.min_eigenvalue = float(min_eigenvalue)
        super().__init__(message or f"map is not completely positive (min Choi eigenvalue {self.min_eigenvalue:.3e})")


class ClassificationError(ChannelError):
    pass


class UnsupportedDecompositionError(ChannelError):
    """The channel is neither unital nor extremal, so no constructive plan exists."""


class ConsistencyError(RuntimeError):
    """Two independent computations disagree; indicates a bug, not bad input."""


class CircleContactError(ConsistencyError):
    pass
