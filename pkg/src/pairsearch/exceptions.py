"""Exception types raised across the package."""


class CoincidentPointsError(ValueError):
    """Two query points are too close to define a bisecting hyperplane."""


class DimensionMismatchError(ValueError):
    """Vector dimensions disagree."""


class AllExcludedError(LookupError):
    """Every object in the catalog is excluded from a lookup."""


class CalibrationError(RuntimeError):
    """The requested flip rate cannot be realized by any noise level."""


class ProtocolError(RuntimeError):
    """A session operation violates the query/answer protocol."""


class CovarianceError(RuntimeError):
    """A belief covariance lost positive definiteness beyond repair."""


class TrainingDivergedError(RuntimeError):
    """Embedding training diverged (objective fell below the floor)."""
