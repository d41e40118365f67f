"""Exception hierarchy shared across the pipeline.

The CLI maps these onto exit codes: argument/config problems -> 1,
data problems (parse/ingest) -> 2, numerical failures -> 3.
"""


class EegFactorError(Exception):
    """Base class for all package errors."""


class ArgumentError(EegFactorError, ValueError):
    """A caller violated an operation's precondition."""


class ConfigError(EegFactorError):
    """Invalid or inconsistent pipeline configuration."""


class ParseError(EegFactorError):
    """A byte stream could not be decoded as the expected file format."""

    def __init__(self, message, field=None, offset=None):
        detail = message
        if field is not None:
            detail += f" (field: {field}"
            if offset is not None:
                detail += f", byte offset: {offset}"
            detail += ")"
        elif offset is not None:
            detail += f" (byte offset: {offset})"
        super().__init__(detail)
        self.field = field
        self.offset = offset


class IngestError(EegFactorError):
    """A recording was well-formed but unusable for the pipeline."""


class NumericalError(EegFactorError):
    """An optimizer failed without producing a usable iterate."""
