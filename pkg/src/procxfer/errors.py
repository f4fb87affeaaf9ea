"""Exception types shared across the package.

Every error raised on a user-facing path derives from :class:`ProcxferError`
so the CLI can distinguish "bad input / bad state" from genuine bugs.
"""


class ProcxferError(Exception):
    """Base class for all errors raised by procxfer."""


class SchemaError(ProcxferError):
    """A required column is missing from an event-log file."""


class RowError(ProcxferError):
    """A single malformed row in an input file.

    Carries the 1-based line number of the offending row.
    """

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class EmptyLogError(ProcxferError):
    """An event log (or one of its splits) ended up with no traces."""


class FormatError(ProcxferError):
    """A file does not conform to its expected on-disk format."""


class IntegrityError(ProcxferError):
    """Stored checksums or fingerprints do not match the actual content."""


class VersionError(ProcxferError):
    """An artifact was written by an unknown or incompatible format version."""


class ConfigurationError(ProcxferError):
    """Mutually inconsistent or out-of-range configuration values."""


class NumericalError(ProcxferError):
    """Training or scoring produced a non-finite value."""
