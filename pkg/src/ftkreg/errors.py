"""Exception types raised by the ftkreg estimators and simulators."""


class FtkregError(Exception):
    """Base class for all ftkreg errors."""


class GridTooCoarse(FtkregError):
    """Curve grid has too few points for the requested derivative order."""


class GridMismatch(FtkregError):
    """Two curves do not share the same sampling grid."""


class NegativeArgument(FtkregError):
    """Kernel evaluated at a negative argument."""


class EmptyNeighborhood(FtkregError):
    """No observation with an observed response falls inside the bandwidth."""


class DegenerateBall(FtkregError):
    """The small-ball estimate F_x(h) is zero: no curve within the bandwidth."""


class ZeroMissingness(FtkregError):
    """Estimated observation probability p(x) is zero."""


class DensityFloorHit(FtkregError):
    """Conditional density estimate hit its floor; the quantile CI is unreliable."""


class InsufficientData(FtkregError):
    """Not enough observed-response observations for bandwidth selection."""


class SpecInvalid(FtkregError):
    """A simulation specification violates its invariants."""


class EmptyInput(FtkregError):
    """An aggregation was requested on an empty collection."""
