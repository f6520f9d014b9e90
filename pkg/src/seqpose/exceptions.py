"""Exception types shared across the toolkit."""


class ZeroQuaternionError(ValueError):
    """Quaternion norm too small to normalize."""


class DimMismatchError(ValueError):
    """Tensor or parameter dimensions are inconsistent."""


class LengthMismatchError(ValueError):
    """Sequence lists have inconsistent lengths."""


class EmptySequenceError(ValueError):
    """An operation requiring at least one element received none."""


class EmptySeriesError(ValueError):
    """An error series with no entries cannot be summarized."""


class TensorFormatError(ValueError):
    """Tensor file has a bad magic string or unsupported version."""
