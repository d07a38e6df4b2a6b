"""Exception types raised by the library."""


class NLRError(Exception):
    """Base class for all library errors."""


class NonPositivePixel(NLRError, ValueError):
    pass


class AllZeroImage(NLRError, ValueError):
    pass


class DimensionMismatch(NLRError, ValueError):
    pass


class ImageTooSmall(NLRError, ValueError):
    pass


class UncoveredPixel(NLRError, ValueError):
    pass


class NoConvergence(NLRError, RuntimeError):
    pass


class ProxDivergence(NLRError, RuntimeError):
    pass


class ZeroWeight(NLRError, ValueError):
    pass


class ImageFormatError(NLRError, ValueError):
    """Malformed or unsupported image file."""


class ConfigError(NLRError, ValueError):
    """Invalid run configuration; the message names the offending key."""

    def __init__(self, key, message):
        self.key = key
        super().__init__(f"{key}: {message}")
