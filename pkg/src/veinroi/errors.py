"""Exception hierarchy shared across the package."""


class VeinRoiError(Exception):
    """Base class for all pipeline errors."""


class UnsupportedFormat(VeinRoiError):
    """Input file is not an 8-bit graymap / grayscale PNG."""


class CorruptData(VeinRoiError):
    """File header parsed but the payload is truncated or malformed."""


class InvalidParameter(VeinRoiError, ValueError):
    """A numeric parameter is outside its documented range."""


class ImageTooSmall(VeinRoiError):
    """Image is smaller than the operation's minimum size."""


class DimensionMismatch(VeinRoiError):
    """Two rasters that must share dimensions do not."""


class NoPegsFound(VeinRoiError):
    """Fewer than two admissible circle hits for the peg pair."""


class RoiUnplaceable(VeinRoiError):
    """The requested ROI square cannot fit inside the image."""


class InvalidSpec(VeinRoiError):
    """Synthetic scene specification violates its invariants."""


class ConventionError(VeinRoiError):
    """Dataset naming-convention config is invalid."""


class StageError(VeinRoiError):
    """Wraps a failure inside the extraction pipeline with the stage name."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"{stage}: {cause}")
        self.stage = stage
        self.cause = cause


class AmbiguousPegsWarning(UserWarning):
    """Two admissible peg pairs scored within 5%; the best one was taken."""
