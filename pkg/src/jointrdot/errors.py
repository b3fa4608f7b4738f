"""Exception types raised across the package."""


class RdotError(Exception):
    """Base class for all errors raised by :mod:`jointrdot`."""


class NonSymmetric(RdotError, ValueError):
    pass


class NoConvergence(RdotError, RuntimeError):
    pass


class DimensionMismatch(RdotError, ValueError):
    pass


class EmptyInput(RdotError, ValueError):
    pass


class InvalidBeta(RdotError, ValueError):
    pass


class InvalidParams(RdotError, ValueError):
    pass


class NoOverlap(RdotError, ValueError):
    """The PSNR ranges of two RD curves do not intersect."""


class BadMagic(RdotError, ValueError):
    pass


class TruncatedFile(RdotError, ValueError):
    pass


class UnsupportedVersion(RdotError, ValueError):
    pass


class BadLength(RdotError, ValueError):
    pass
