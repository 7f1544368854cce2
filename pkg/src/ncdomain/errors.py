"""Exception hierarchy.

Validation problems (bad shapes, bad indices, malformed input) derive from
``ValidationError``; everything that goes wrong inside a numerical routine
derives from ``NumericalError``.  The CLI maps the two families to distinct
exit codes.
"""


class NCDomainError(Exception):
    """Base class for all library errors."""


class ValidationError(NCDomainError, ValueError):
    """Input does not satisfy a documented precondition."""


class ShapeError(ValidationError):
    pass


class CapacityError(ValidationError):
    """A word enumeration would exceed the configured cap."""


class NumericalError(NCDomainError, ArithmeticError):
    pass


class ConstantTermError(NumericalError):
    """Substitution of a tuple with nonzero constant term into a non-polynomial."""


class NotInvertibleError(NumericalError):
    pass


class SingularMatrixError(NumericalError):
    pass


class NotHermitianError(NumericalError):
    pass


class IndefiniteError(NumericalError):
    """A matrix required to be PSD is decisively indefinite."""


class NotInDomainError(IndefiniteError):
    pass


class BoundaryError(NumericalError):
    pass


class ResolventError(NumericalError):
    pass


class InternalInconsistencyError(NumericalError):
    """Two independent computations of the same quantity disagree."""
