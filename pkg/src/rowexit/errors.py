"""Exception hierarchy shared across the package.

Every error raised by rowexit derives from RowExitError so callers can
catch the whole family at the CLI boundary.
"""


class RowExitError(Exception):
    """Base class for all rowexit errors."""


class MissingFile(RowExitError):
    """An input file does not exist."""


class DecodeError(RowExitError):
    """An image file could not be decoded into the expected format."""


class DimensionMismatch(RowExitError):
    """Paired RGB and depth frames disagree in size (corrupt recording)."""


class InvalidMask(RowExitError):
    """A crop mask is empty or falls outside the target image."""


class ImageTooSmall(RowExitError):
    """Image below the minimum size the feature pipeline supports."""


class WindowOutOfBounds(RowExitError):
    """Descriptor sampling window is not fully available for a keypoint."""


class InsufficientDepth(RowExitError):
    """Too few valid depth pixels to take a usable row statistic."""


class HeadlandTooShort(RowExitError):
    """Visible headland span is shorter than the robot; cannot navigate."""


class StateError(RowExitError):
    """Pipeline operation called in a phase that does not allow it."""


class ConfigError(RowExitError):
    """Run configuration is missing, malformed, or names unknown keys."""


class ManifestError(RowExitError):
    """Replay manifest is malformed or cannot start the pipeline."""


class SchemaError(RowExitError):
    """A results CSV does not carry the expected columns."""


class EmptyInput(RowExitError):
    """A results CSV holds no trial rows."""
