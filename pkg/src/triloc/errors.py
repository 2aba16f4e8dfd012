"""Exception types shared across the package.

Each maps to one failure category surfaced by the public operations; the CLI
translates them into process exit codes.
"""


class TrilocError(Exception):
    """Base class for all package errors."""


class ShapeError(TrilocError):
    """Operand dimensions are incompatible."""


class ParamLookupError(TrilocError, KeyError):
    """No parameter registered under the requested path."""


class ConfigError(TrilocError):
    """Invalid configuration value or unknown configuration key."""


class ContractError(TrilocError):
    """A caller violated an operation precondition."""


class EmptySceneError(TrilocError):
    """Every instance slot is masked out; nothing to attend over or pool."""


class DegenerateSceneError(TrilocError):
    """A descriptor collapsed to the zero vector and cannot be normalized."""


class NumericError(TrilocError):
    """Non-finite values appeared where finite ones are required."""


class GenerationError(TrilocError):
    """The synthetic world generator could not satisfy its constraints."""


class DatasetParseError(TrilocError):
    """A dataset file is malformed.

    ``line`` is the 1-based line number of the offending record.
    """

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataError(TrilocError):
    """A dataset, split, or database is empty or otherwise unusable."""
