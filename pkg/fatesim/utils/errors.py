"""
Exception hierarchy. Every error carries the process exit code the CLI
returns when it escapes a command handler.
"""

from typing import List, Optional


class FateError(Exception):
    """Base class for all fatesim errors."""

    exit_code: int = 1

    def __init__(self, message: str):
        super().__init__(message)
        self.message = message


class ConfigError(FateError):
    """Invalid configuration, flags or knob names."""

    exit_code = 2


# Model-core

class ModelError(FateError):
    """An app model could not be loaded."""

    exit_code = 2


class ModelSyntaxError(ModelError):
    """The model document is not well-formed JSON or violates the schema."""

    def __init__(self, message: str, line: Optional[int] = None, column: Optional[int] = None):
        location = f" (line {line}, column {column})" if line is not None else ""
        super().__init__(f"{message}{location}")
        self.line = line
        self.column = column


class ModelValidationError(ModelError):
    """The model references unknown nodes, repeats identifiers, or has no nodes."""

    def __init__(self, diagnostics: List[object]):
        self.diagnostics = diagnostics
        lines = "; ".join(str(d) for d in diagnostics)
        super().__init__(f"Invalid model: {lines}")


# Guard language

class GuardError(FateError):
    """Base class for guard/assignment expression errors."""

    exit_code = 2


class GuardSyntaxError(GuardError):
    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class GuardNameError(GuardError):
    def __init__(self, name: str, position: int):
        super().__init__(f"Unbound identifier '{name}' at position {position}")
        self.name = name
        self.position = position


class GuardTypeError(GuardError):
    def __init__(self, message: str, position: int):
        super().__init__(f"Type mismatch: {message} at position {position}")
        self.position = position


class GuardEvaluationError(GuardError):
    """A variable was missing from the store at evaluation time."""

    exit_code = 1


class MissingInputError(GuardEvaluationError):
    """`__input__` was referenced but no input string was supplied."""


# Environment

class EnvironmentContractError(FateError):
    """The environment was driven outside its contract (e.g. stepping a finished episode)."""


# Neural substrate

class NetworkError(FateError):
    pass


class DimensionMismatchError(NetworkError):
    pass


class StaleCacheError(NetworkError):
    """A forward cache was used after the network's parameters changed."""


class NonFiniteGradientError(NetworkError):
    pass


# Benchmarking

class OracleError(FateError):
    """The value-iteration state space is too large."""


class InsufficientRunsError(FateError):
    exit_code = 2


class RunFailedError(FateError):
    exit_code = 1


class RunInvariantError(RunFailedError):
    """A finished run violated episode accounting or coverage monotonicity."""
