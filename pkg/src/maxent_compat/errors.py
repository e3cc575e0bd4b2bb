"""Exception types raised across the package."""


class MaxEntError(Exception):
    """Base class for all package errors."""


class InvalidInstanceError(MaxEntError, ValueError):
    """Input operators, states or targets violate a precondition."""


class NumericalBreakdownError(MaxEntError, ArithmeticError):
    """A computation produced NaN/inf or an impossible intermediate value."""


class InconclusiveWitnessError(MaxEntError, RuntimeError):
    """The witness construction could not certify incompatibility."""


class SchemaError(InvalidInstanceError):
    """A JSON document does not match the expected layout.

    ``path`` is a dotted/indexed location inside the document, e.g.
    ``observables[1].terms[0].pauli``.
    """

    def __init__(self, path, message):
        self.path = path
        self.message = message
        super().__init__(f"{path or '<root>'}: {message}")
