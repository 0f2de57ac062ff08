"""Exception types raised across the package."""


class RwreError(Exception):
    """Base class for all package-specific errors."""


class NotSimplex(RwreError):
    """Jump probabilities are negative or do not sum to one."""


class EllipticityViolated(RwreError):
    """Some jump probability falls below the ellipticity floor."""


class MaxStepsExceeded(RwreError):
    """A simulation hit its step budget before the event of interest."""


class MalformedPath(RwreError):
    """A path violates the ladder-excursion shape expected here."""


class InsufficientData(RwreError):
    """Not enough conditioning events to form an empirical table."""


class NumericalOverflow(RwreError):
    """An unscaled matrix accumulation left the floating-point range."""


class NotConverged(RwreError):
    """An iterative computation did not meet its tolerance in time."""


class DegenerateDenominator(RwreError):
    """A probability normalizer is zero or negative."""


class SeriesDiverged(RwreError):
    """A series truncation was exhausted while terms were still large."""


class NotDriftPositive(RwreError):
    """The site law does not have strictly positive mean jump."""


class SpectralRadiusAtLeastOne(RwreError):
    """A mean matrix is not subcritical, so its geometric series diverges."""


class ConditioningStarved(RwreError):
    """A conditional Monte Carlo estimate saw too few qualifying events."""


class DenominatorNonpositive(RwreError):
    """The annealed expected ladder duration came out nonpositive."""
