"""Exception hierarchy for the dvplan package."""


class DvPlanError(Exception):
    """Base class for all dvplan errors."""


class CatalogParseError(DvPlanError):
    """A catalog file row could not be parsed; message carries the line number."""


class UnsupportedOrbitError(DvPlanError):
    """An orbit outside the supported elliptic regime (e >= 1, bad inclination...)."""


class ValidationError(DvPlanError):
    """An input violates a documented precondition or invariant."""


class KeplerConvergenceError(DvPlanError):
    """Kepler's equation failed to converge within the iteration cap."""


class LambertInfeasibleError(DvPlanError):
    """No Lambert solution exists for the requested time of flight / revolutions."""


class DegenerateGeometryError(DvPlanError):
    """Transfer plane is undefined (collinear or near-180-degree geometry)."""


class MatrixFormatError(DvPlanError):
    """A matrix document is malformed; message names the offending field."""


class CapacityError(DvPlanError):
    """A requested construction exceeds an explicit size cap."""


class SequenceNotFoundError(DvPlanError):
    """Path enumeration exhausted without a distinct-object sequence.

    Carries the cheapest repeated-label result found on ``best_path`` for
    diagnostics (``None`` when not even a repeated-label path exists).
    """

    def __init__(self, message, best_path=None):
        super().__init__(message)
        self.best_path = best_path
