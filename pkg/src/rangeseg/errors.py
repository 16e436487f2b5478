"""Exception hierarchy shared across the package."""


class RangesegError(Exception):
    """Base class for all package errors."""


class FormatError(RangesegError):
    """Malformed on-disk data: bad byte length, bad header, bad config syntax."""


class DataError(RangesegError):
    """Well-formed but semantically invalid data: non-finite values, zero
    ranges, misaligned inputs, out-of-range parameters."""
