"""Exception types shared across the package."""


class DimensionMismatchError(ValueError):
    """Shapes or feature widths do not agree with what the operation requires."""


class InsufficientDataError(ValueError):
    """Not enough frames (or voiced frames) to estimate the requested statistics."""


class NonFiniteError(ValueError):
    """A NaN or infinity showed up where the computation must stay finite."""


class FormatError(ValueError):
    """An on-disk file does not follow the expected format."""
