"""Exception types shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, data problems
exit 2, anything else that goes wrong at runtime exits 3.
"""


class OshgError(Exception):
    """Base class for all package errors."""


class ShapeError(OshgError, ValueError):
    """Operands or parameters have incompatible shapes."""


class DataError(OshgError, ValueError):
    """A data file or record failed validation.

    ``line`` carries the 1-based line number when the problem is tied to a
    specific line of an input file, else ``None``.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ConfigError(OshgError, ValueError):
    """A configuration value is out of range or unknown."""


class AugmentError(OshgError, RuntimeError):
    """Synonym generation failed (network, protocol, or response shape)."""


class TrainingDiverged(OshgError, RuntimeError):
    """The training loss became non-finite."""
