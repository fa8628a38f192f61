"""Exception types shared across the package."""


class NumericalFailure(Exception):
    """Raised when linear algebra cannot be trusted (stalled pivoting,
    singular basis); never a silent wrong answer."""


class RelaxationError(Exception):
    """LP relaxation of a MIP is infeasible or unbounded."""

    def __init__(self, status, message=""):
        self.status = status
        super().__init__(message or f"relaxation is {status}")


class GenerationError(Exception):
    """Instance generator could not satisfy its structural guarantees."""


class ParseError(Exception):
    """Malformed instance/model/dataset file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyBagError(Exception):
    """Bag aggregation requested on an empty cut collection."""


class ShapeError(Exception):
    """Array shape does not match the declared network architecture."""


class ValidationError(Exception):
    """Inconsistent configuration or mismatched evaluation inputs."""
