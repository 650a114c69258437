"""Exception types shared across the package."""

from __future__ import annotations


class PairFiberError(Exception):
    """Base class for all package errors."""


class NegativeCell(PairFiberError):
    """A move would drive some table cell below zero."""


class BoundaryError(PairFiberError):
    """The sufficient statistic lies on the boundary of the marginal cone; no interior MLE."""


class ZeroMargin(BoundaryError):
    """Some component of the sufficient statistic is zero."""


class ZeroExpected(PairFiberError):
    """An expected (fitted) cell is zero where a strictly positive value is required."""


class ZeroNull(ZeroExpected):
    """A cell of the null-model fit is zero in a likelihood-ratio computation."""


class TooSmall(PairFiberError):
    """Too few categories for the requested construction."""


class FiberTooLarge(PairFiberError):
    """Fiber enumeration exceeded its configured cap."""


class ParseError(PairFiberError):
    """Malformed table input; ``line`` is the 1-based offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DidNotConverge(UserWarning):
    """Iterative scaling exhausted its budget; the returned fit has ``converged=False``."""
