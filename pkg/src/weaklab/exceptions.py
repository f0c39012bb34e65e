"""Exception hierarchy shared by all weaklab modules."""


class WeakLabError(Exception):
    """Base class for every error raised by weaklab."""


class NotHermitian(WeakLabError, ValueError):
    pass


class NotPositiveDefinite(WeakLabError, ValueError):
    pass


class Singular(WeakLabError, ValueError):
    """Raised when a shifted matrix is numerically singular.

    The offending shift is kept on ``shift`` so batch drivers can report it.
    """

    def __init__(self, message, shift=None):
        super().__init__(message)
        self.shift = shift


class DimensionMismatch(WeakLabError, ValueError):
    pass


class NotSquare(DimensionMismatch):
    pass


class TooLarge(WeakLabError, ValueError):
    pass


class NotOrthonormal(WeakLabError, ValueError):
    pass


class SignMismatch(WeakLabError, AssertionError):
    pass


class NotSymmetry(WeakLabError, ValueError):
    pass


class BadAxis(WeakLabError, ValueError):
    pass


class NotFirstOrder(WeakLabError, ValueError):
    """Raised when an operator has stencil mass outside first-order offsets."""

    def __init__(self, message, off_stencil_mass=None):
        super().__init__(message)
        self.off_stencil_mass = off_stencil_mass


class ConfigError(WeakLabError, ValueError):
    """Invalid experiment configuration; ``key`` names the offending entry."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key
