"""Exception hierarchy shared by all fsk modules."""


class FskError(Exception):
    """Base class for every error raised by fsk."""


class NotSymmetric(FskError, ValueError):
    pass


class NotPositiveSemiDefinite(FskError, ValueError):
    pass


class Singular(FskError, ValueError):
    pass


class NonPositiveDiagonal(FskError, ValueError):
    pass


class InvalidModel(FskError, ValueError):
    """Raised by model validation; the message names the violated invariant."""


class ModelFormatError(InvalidModel):
    """The model document does not follow the file schema."""


class GenerationFailed(FskError, RuntimeError):
    pass


class NumericalIntegrityError(FskError, ArithmeticError):
    """A computed quantity left the range its definition guarantees."""


class HeywoodCase(FskError, ArithmeticError):
    """A second-order loading implies a non-positive uniqueness."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NotConverged(FskError, ArithmeticError):
    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


#: Errors the CLI maps to exit code 3.
NUMERICAL_ERRORS = (
    NotPositiveSemiDefinite,
    Singular,
    NonPositiveDiagonal,
    NumericalIntegrityError,
    HeywoodCase,
    NotConverged,
)
