"""Exception types raised across the wavecurve package."""

from __future__ import annotations

from typing import Iterable, List, Optional


class WavecurveError(Exception):
    """Base class for every error raised by wavecurve."""


class InputError(WavecurveError, ValueError):
    """Invalid argument values (NaN in a series, empty collections, ...)."""


class DomainError(InputError):
    """A point or interval lies outside the domain of a basis or grid."""


class ShapeError(InputError):
    """Arrays or curves defined on incompatible grids."""


class RankError(WavecurveError, ValueError):
    """A linear system is singular where the caller required full rank."""


class StandardizationError(InputError):
    """A design column cannot be standardized (zero variance)."""


class ConfigError(InputError):
    """The run configuration is incomplete or inconsistent."""


class KeyedJoinError(InputError):
    """Two keyed collections do not share the same unit keys."""

    def __init__(self, message: str, missing: Iterable[str] = ()) -> None:
        self.missing: List[str] = sorted(str(m) for m in missing)
        if self.missing:
            message = f"{message}; absent units: {', '.join(self.missing)}"
        super().__init__(message)


class ValidationError(InputError):
    """An input file violates its contract; carries file/row/column coordinates."""

    def __init__(
        self,
        message: str,
        path: Optional[str] = None,
        row: Optional[int] = None,
        column: Optional[str] = None,
    ) -> None:
        self.path = path
        self.row = row
        self.column = column
        where = []
        if path:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if column:
            where.append(f"column '{column}'")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)


class ConvergenceError(WavecurveError, RuntimeError):
    """An iterative solver hit its sweep limit without meeting the tolerance."""

    def __init__(self, message: str, iterations: int, diagnostic: float) -> None:
        self.iterations = iterations
        self.diagnostic = diagnostic
        super().__init__(f"{message} after {iterations} sweeps (diagnostic={diagnostic:.3e})")


class StageError(WavecurveError, RuntimeError):
    """A pipeline stage failed; names the stage and, when known, the unit."""

    def __init__(self, stage: str, cause: BaseException, unit: Optional[str] = None) -> None:
        self.stage = stage
        self.unit = unit
        self.cause = cause
        context = f" (unit {unit})" if unit else ""
        super().__init__(f"Stage '{stage}' failed{context}: {cause}")
