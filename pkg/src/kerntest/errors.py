"""Exception types shared across the package.

Library-level contract violations (bad shapes, invalid parameters) raise
plain ``ValueError``.  The classes below mark conditions the command line
distinguishes by exit code: configuration problems exit with 2, data
problems with 3.
"""


class KerntestError(Exception):
    """Base class for package-specific errors."""


class ConfigError(KerntestError):
    """Incoherent flags or an invalid experiment configuration."""


class DataError(KerntestError):
    """Rejected input data: missing files, non-numeric cells, NaN/Inf, ragged rows."""
