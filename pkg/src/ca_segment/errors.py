"""Exception types shared across the package."""


class SegmenterError(Exception):
    """Base class for every error raised by this package."""


class FormatError(SegmenterError):
    """A file's header or payload is malformed or inconsistent."""


class UnsupportedFormatError(FormatError):
    """A file is well-formed but uses a variant this package does not read."""


class ContractError(SegmenterError):
    """An operation was called with arguments violating its preconditions."""
