"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4.
"""


class SpikevolError(Exception):
    """Base class for all package errors."""


class ConfigError(SpikevolError):
    """Invalid or inconsistent run configuration."""


class DataError(SpikevolError):
    """Malformed input data (files, meshes, masks, manifests)."""


class NumericError(SpikevolError):
    """Numerical failure (singular systems, non-finite values)."""


class PlyParseError(DataError):
    """Malformed PLY file; carries the byte offset of the offending token."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset
