"""Exception types raised across the package.

All of them derive from :class:`ValueError` so callers that only care about
"bad input" can catch one thing.
"""


class NotPositiveDefinite(ValueError):
    pass


class NotPSD(ValueError):
    pass


class UnsupportedOrder(ValueError):
    pass


class InvalidRate(ValueError):
    pass


class ZeroSymbol(ValueError):
    pass


class UnnormalizedPmf(ValueError):
    pass


class DimensionMismatch(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class UnsupportedDimension(ValueError):
    pass
