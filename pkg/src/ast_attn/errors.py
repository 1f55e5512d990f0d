"""Exception types raised across the package.

Every error derives from :class:`AstAttnError` so callers (and the CLI) can
catch the whole family and report the concrete class name.
"""


class AstAttnError(Exception):
    """Base class for all package errors."""


class ShapeMismatchError(AstAttnError, ValueError):
    pass


class ZeroRowError(AstAttnError, ArithmeticError):
    """A row lost (numerically) all of its mass and cannot be normalized."""


class OverlapError(AstAttnError, ValueError):
    pass


class RangeError(AstAttnError, ValueError):
    pass


class EmptySubPromptError(AstAttnError, ValueError):
    pass


class UnknownWordError(AstAttnError, KeyError):
    pass


class FormatError(AstAttnError, ValueError):
    pass


class NonContiguousIdsError(AstAttnError, ValueError):
    pass


class DimError(AstAttnError, ValueError):
    pass


class BadIndexError(AstAttnError, IndexError):
    pass


class EmptyMaskError(AstAttnError, ValueError):
    """An instance vanished when its sketch was pooled to latent resolution."""


class BindingError(AstAttnError, ValueError):
    pass


class LayoutMismatchError(AstAttnError, ValueError):
    pass


class DimMismatchError(AstAttnError, ValueError):
    pass


class BadTokenError(AstAttnError, IndexError):
    pass


class EmptyRangeError(AstAttnError, ValueError):
    pass


class ProfileError(AstAttnError, ValueError):
    pass
