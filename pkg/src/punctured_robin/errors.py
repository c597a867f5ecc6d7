"""Exception hierarchy shared by all modules."""


class RobinError(Exception):
    """Base class for errors raised by this package."""


class InvalidInputError(RobinError, ValueError):
    """An argument violates a documented precondition."""


class CoincidentPointsError(InvalidInputError):
    """A kernel was evaluated at coincident points."""


class GeometryError(InvalidInputError):
    """A point or hole lies outside its admissible region."""


class UnsupportedCaseError(RobinError, NotImplementedError):
    """The requested dimension or domain variant is not supported."""


class NonConvergenceError(RobinError, RuntimeError):
    """An iterative or adaptive procedure failed to reach its tolerance."""
