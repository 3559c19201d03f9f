from __future__ import annotations


class CarnotError(Exception):
    """Base class for errors raised by carnotgraph."""


class DimensionError(CarnotError, ValueError):
    pass


class ParseError(CarnotError, ValueError):
    """Malformed group or scenario file.  Carries file/line context when known."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


class PreconditionError(CarnotError, ValueError):
    pass


class SplittingError(PreconditionError):
    """A candidate (W, L) pair is not a valid splitting.

    ``reason`` is one of ``"not-graded"``, ``"not-complementary"``,
    ``"not-ideal"``, ``"not-carnot"``.
    """

    def __init__(self, reason: str, message: str):
        self.reason = reason
        super().__init__(message)


class DomainError(CarnotError, ValueError):
    pass


class NotDifferentiableError(CarnotError):
    def __init__(self, message: str, report=None):
        self.report = report
        super().__init__(message)


class EstimationError(CarnotError):
    pass


class HomomorphismError(CarnotError):
    """A map fails to be a homogeneous homomorphism.

    ``reason`` is ``"brackets"``, ``"linearity"`` or ``"projection"``.
    """

    def __init__(self, reason: str, message: str, residual: float | None = None):
        self.reason = reason
        self.residual = residual
        super().__init__(message)
