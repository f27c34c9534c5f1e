"""Exception types shared across the package."""

from __future__ import annotations


class CavsimError(Exception):
    """Base class for all package errors."""


class ParameterError(CavsimError, ValueError):
    """A physical parameter violates its declared range or invariant."""


class ContractViolation(CavsimError, ValueError):
    """An operation was called with inputs outside its contract
    (non-finite state components, unknown moment identifiers, ...)."""


class DomainError(CavsimError, ValueError):
    """Mathematical domain error (non-positive dB argument, zero
    denominator in a diagnostic factor, undefined scaled quantities)."""


class UnpolarizedStateError(CavsimError):
    """A spin-squeezing parameter is undefined because the collective
    polarization in the complementary plane vanishes."""


class IntegrationFailure(CavsimError):
    """Time integration stopped before reaching t_end.

    Carries the partial trace computed so far and the failure time, so a
    caller can inspect how far the solver got.  Failure is an expected
    outcome for some parameter regions, not a bug.
    """

    def __init__(self, message, partial_trace=None, failure_time=None):
        super().__init__(message)
        self.partial_trace = partial_trace
        self.failure_time = failure_time


class NoSteadyStateError(CavsimError):
    """Neither root finding nor long integration produced a verified
    stationary point (limit cycle, lasing runaway, or budget exceeded)."""

    def __init__(self, message, candidate=None, residual_norm=None):
        super().__init__(message)
        self.candidate = candidate
        self.residual_norm = residual_norm


class TruncationError(CavsimError):
    """Density-matrix invariants broke beyond tolerance during exact
    evolution; the Fock cutoff is too small for the requested dynamics."""


class ConfigError(CavsimError, ValueError):
    """Configuration file or flag error, with source location when known."""

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column

    def __str__(self):
        base = super().__str__()
        if self.line is not None and self.column is not None:
            return f"line {self.line}, column {self.column}: {base}"
        if self.line is not None:
            return f"line {self.line}: {base}"
        return base


class SchemaError(CavsimError, ValueError):
    """A CSV file does not match the expected schema."""

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line

    def __str__(self):
        base = super().__str__()
        if self.line is not None:
            return f"line {self.line}: {base}"
        return base
