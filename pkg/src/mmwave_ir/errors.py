"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Array shapes are inconsistent with the requested operation."""


class ParameterError(ValueError):
    """A scalar parameter is outside its admissible range."""


class SolverError(RuntimeError):
    """The gain system could not be solved reliably.

    Attributes
    ----------
    condition : float
        Estimated 2-norm condition number of the offending system matrix.
    """

    def __init__(self, message, condition=float("nan")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition
