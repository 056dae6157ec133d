"""Shared exception types for pipeline stages."""


class CycleSyncError(Exception):
    """Base class for all package-specific errors."""


class SchemaError(CycleSyncError):
    """Input file is missing a required column or has an unparseable layout."""


class GapError(CycleSyncError):
    """Monthly series has an internal gap."""


class DuplicateRowError(CycleSyncError):
    """Duplicate (entity, month) observation in a monthly panel."""


class AlignmentError(CycleSyncError):
    """Two fields or series do not share the same grid or time span."""


class WeightError(CycleSyncError):
    """Benchmark weights are missing, negative, or sum to zero."""


class CoverageError(CycleSyncError):
    """A required covariate field is missing for a country-year."""
