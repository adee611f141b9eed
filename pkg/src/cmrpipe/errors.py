"""Exception hierarchy for the pipeline.

Every failure mode surfaced to callers maps onto one of these classes so
that batch drivers and the CLI can report machine-readable error kinds.
"""


class CmrPipeError(Exception):
    """Base class for all errors raised by this package."""


class GeometryError(CmrPipeError, ValueError):
    """Invalid or mismatched volume geometry (affine, shape, spacing)."""


class DominanceError(GeometryError):
    """Affine too oblique to assign a unique dominant axis per world axis."""


class ParameterError(CmrPipeError, ValueError):
    """Out-of-range or inconsistent parameters."""


class UsageError(CmrPipeError):
    """API misuse, e.g. trilinear interpolation requested for labels."""


class NumericError(CmrPipeError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class DegenerateHistogramError(CmrPipeError, ValueError):
    """Intensity histogram too flat to define landmarks."""


class MaskError(CmrPipeError, ValueError):
    """Empty or unusable foreground mask."""


class FormatError(CmrPipeError):
    """Malformed or unsupported file content."""


class ManifestError(CmrPipeError):
    """Inconsistent dataset manifest (duplicates, bad fields)."""


class ConfigError(CmrPipeError):
    """Invalid configuration, e.g. unknown label codes."""
