"""Exception types shared across the package."""


class PermsenseError(Exception):
    """Base class for all package-specific errors."""


class RankDeficient(PermsenseError):
    """A design matrix failed the relative rank threshold."""


class NoConvergence(PermsenseError):
    """An iterative solver exhausted its budget without certifying optimality.

    A partial result may be attached as ``.result`` so callers can still
    inspect or persist it.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class InvalidSparsity(PermsenseError, ValueError):
    """Requested permutation sparsity is impossible (k = 1 or k > p)."""


class DimensionMismatch(PermsenseError, ValueError):
    """Operands have incompatible shapes."""


class ConfigInvalid(PermsenseError, ValueError):
    """A configuration object violates its invariants."""


class DegenerateDenominator(PermsenseError, ValueError):
    """The error-bound denominator is not positive at these parameters."""


class ZeroReference(PermsenseError, ValueError):
    """A normalized metric was requested against an all-zero reference."""


class IndexOutOfRange(PermsenseError, IndexError):
    """A pixel or coordinate index lies outside the valid grid."""
