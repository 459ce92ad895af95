from __future__ import annotations


class McfracError(RuntimeError):
    """Base error. ``error_kind`` is the stable machine-readable tag used by the CLI,
    the action log and the job server."""

    error_kind = "internal"

    def __init__(self, message: str, **details: object) -> None:
        super().__init__(message)
        self.details = details


class SeriesError(McfracError):
    error_kind = "series"


class NonInvertibleSeries(SeriesError):
    error_kind = "non_invertible_series"


class ValidityExceeded(SeriesError):
    error_kind = "validity_exceeded"


class SolverError(McfracError):
    error_kind = "solver"


class NonLinearDependence(SolverError):
    error_kind = "non_linear"


class Inconsistent(SolverError):
    error_kind = "inconsistent"


class Underdetermined(SolverError):
    error_kind = "underdetermined"


class BudgetExceeded(McfracError):
    error_kind = "budget_exceeded"


class DerivationError(McfracError):
    error_kind = "derivation"


class AutoVanishViolated(DerivationError):
    error_kind = "auto_vanish_violated"


class ZeroDenominator(McfracError):
    error_kind = "zero_denominator"


class NumericError(McfracError):
    error_kind = "numeric"


class TailBoundUnavailable(NumericError):
    error_kind = "tail_bound_unavailable"


class QuadratureFailed(NumericError):
    error_kind = "quadrature_failed"


class EnclosuresTooWide(NumericError):
    error_kind = "enclosures_too_wide"


class ConfigError(McfracError):
    error_kind = "config"


class CacheError(McfracError):
    error_kind = "cache"


class UnknownFamily(McfracError, KeyError):
    error_kind = "invalid_family"

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "Unknown family"
