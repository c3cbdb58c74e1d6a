"""Exception types raised across the toolkit."""


class HybridEVSError(Exception):
    """Base class for all toolkit errors."""


class PatternError(HybridEVSError, ValueError):
    """A pattern tile violates the HybridEVS layout rules."""


class LengthMismatch(HybridEVSError, ValueError):
    pass


class RangeError(HybridEVSError, ValueError):
    pass


class DecodeError(HybridEVSError, ValueError):
    pass


class UnsupportedBitDepth(HybridEVSError, ValueError):
    pass


class DimensionMismatch(HybridEVSError, ValueError):
    pass


class TooSmall(HybridEVSError, ValueError):
    pass


class MissingResult(HybridEVSError, LookupError):
    def __init__(self, stem: str, message: str | None = None):
        self.stem = stem
        super().__init__(message or f"missing result for {stem!r}")


class UnexpectedResult(HybridEVSError, LookupError):
    def __init__(self, stem: str):
        self.stem = stem
        super().__init__(f"result {stem!r} has no matching label")
