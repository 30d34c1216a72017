"""Exception types shared across the package."""


class DimensionError(ValueError):
    """An array or vector does not have the size an operator expects."""


class OrderingError(ValueError):
    """A space-time vector is in the wrong index ordering."""


class EmptyShardError(ValueError):
    """A processor grid would leave a worker without any data."""


class NotSPDError(ArithmeticError):
    """Conjugate gradients met a non-positive curvature direction."""


class FormatError(ValueError):
    """A binary operator/vector file is malformed."""
