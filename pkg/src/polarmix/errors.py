"""Exception types shared across the package."""


class PolarMixError(Exception):
    """Base class for all library errors."""


class ChannelError(PolarMixError, ValueError):
    """Invalid channel description (normalization, negativity, range)."""


class SymmetryError(ChannelError):
    """Channel transition table has no involutive output pairing."""


class BudgetError(PolarMixError):
    """Exhaustive enumeration would exceed the configured budget."""


class SearchExhaustedError(PolarMixError):
    """No kernel candidate met the stop conditions."""


class PlanError(PolarMixError, ValueError):
    """Inconsistent construction plan or codec input."""
