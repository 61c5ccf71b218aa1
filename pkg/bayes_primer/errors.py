"""Exceptions raised by the bayes-primer toolkit."""
from __future__ import annotations


class BayesPrimerError(Exception):
    """Base exception for bayes-primer errors."""


class UsageError(BayesPrimerError):
    """The command line could not be understood."""

    def __init__(self, message: str, usage: str | None = None) -> None:
        super().__init__(message)
        self.usage = usage


class SettingsError(BayesPrimerError, ValueError):
    """Sampler or run settings are inconsistent."""


class DataError(BayesPrimerError, ValueError):
    """User data or parameters are invalid."""


class ParameterError(DataError):
    """A distribution parameter lies outside its domain."""


class ImpossibleDataError(DataError):
    """Observed data has zero probability under every prior point."""


class IngestError(DataError):
    """An input file could not be read into typed columns."""


class _LocatedError(DataError):
    """Data error that may point at a line and column of a model script."""

    def __init__(
        self, message: str, line: int | None = None, column: int | None = None
    ) -> None:
        self.message = message
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


class ModelSyntaxError(_LocatedError):
    """A model script failed lexical, syntactic or arity checks."""


class ModelCompileError(_LocatedError):
    """A parsed model could not be lowered to a graph."""


class NumericalError(BayesPrimerError, ArithmeticError):
    """A numerical procedure failed."""


class ConvergenceError(NumericalError):
    """An iterative solver did not converge."""


class DegenerateChainError(NumericalError):
    """A chain column has zero variance."""
