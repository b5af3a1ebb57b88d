"""Exception hierarchy shared across the package.

CLI exit codes: ConfigError -> 2, oracle errors -> 3, NumericError -> 4.
"""


class LatentRlError(Exception):
    """Base class for all package errors."""


class InputError(LatentRlError, ValueError):
    """An argument violated a shape, range, or structural precondition."""


class ConfigError(LatentRlError, ValueError):
    """An experiment or world configuration is invalid or inconsistent."""


class NumericError(LatentRlError, ArithmeticError):
    """A non-finite value showed up where the contract forbids it."""


class UnavailableError(LatentRlError, RuntimeError):
    """The requested result cannot be produced (empty buffer, empty sample set)."""


class ConstructionError(LatentRlError, RuntimeError):
    """A seeded construction could not satisfy its invariants within the retry bound."""


class OracleError(LatentRlError, RuntimeError):
    """Base class for failures while querying a black-box oracle."""

    def __init__(self, message, query_ordinal=None):
        if query_ordinal is not None:
            message = f"{message} (query #{query_ordinal})"
        super().__init__(message)
        self.query_ordinal = query_ordinal


class OracleTransportError(OracleError):
    """The external oracle process died, closed its pipe, or refused input."""


class OracleProtocolError(OracleError):
    """The peer sent a line that does not parse or does not match the contract."""


class OracleHandshakeError(OracleError, ValueError):
    """The peer's announced descriptor conflicts with the experiment config."""
