class PSphereError(Exception):
    """Base class for every error raised by psphere."""


class InvalidInputError(PSphereError, ValueError):
    pass


class NotOnManifoldError(InvalidInputError):
    pass


class NotTangentError(InvalidInputError):
    pass


class DimensionError(PSphereError, ValueError):
    pass


class DomainError(PSphereError, ValueError):
    pass


class OutOfDomainError(PSphereError, ValueError):
    """Raised when an inverse retraction is asked for a point outside its domain.

    ``condition`` names the predicate that failed, e.g. ``"<n_x, y> > 0"``.
    """

    def __init__(self, condition: str, detail: str = ""):
        self.condition = condition
        message = f"outside the inverse retraction domain: {condition} violated"
        if detail:
            message = f"{message} ({detail})"
        super().__init__(message)


class StepTooLargeError(PSphereError, ArithmeticError):
    pass


class NumericError(PSphereError, ArithmeticError):
    pass


class NotADescentDirectionError(PSphereError, ValueError):
    pass


class LineSearchError(PSphereError, RuntimeError):
    pass


class InstanceGenerationError(PSphereError, RuntimeError):
    """A random instance kept failing its acceptance test after every retry."""
