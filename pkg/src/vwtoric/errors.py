"""Exception hierarchy.

``ValidationError`` subclasses are input problems (CLI exit 2);
``ComputationError`` subclasses arise while computing (CLI exit 3).
"""


class VWError(Exception):
    """Base class for all package errors."""

    module = "vwtoric"


class ValidationError(VWError):
    pass


class ComputationError(VWError):
    pass


# geometry
class UnboundedRegion(ValidationError):
    module = "geometry"


class EmptyInterior(ValidationError):
    module = "geometry"


class NonPrimitiveNormal(ValidationError):
    module = "geometry"


class DimensionMismatch(ValidationError):
    module = "geometry"


# weights
class WeightSyntaxError(ValidationError):
    module = "weights"

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} at position {position}")
        self.position = position


class UnknownVariable(ValidationError):
    module = "weights"


class DomainError(ComputationError):
    module = "weights"


class PositivityViolation(ValidationError):
    module = "weights"

    def __init__(self, message: str, index=None):
        super().__init__(message)
        self.index = index


# quad
class NonFiniteIntegrand(ComputationError):
    module = "quad"

    def __init__(self, node):
        super().__init__(f"integrand is not finite at node {node}")
        self.node = node


# invariants
class NonConvexPieces(ValidationError):
    module = "invariants"


class SingularGram(ComputationError):
    module = "invariants"


# abreu
class EvaluationOnBoundary(ComputationError):
    module = "abreu"


class TooCloseToBoundary(ComputationError):
    module = "abreu"


# testconfig
class CapViolation(ValidationError):
    module = "testconfig"


class InsufficientSamples(ValidationError):
    module = "testconfig"


# pbundle
class SingularSystem(ComputationError):
    module = "pbundle"


class Z0OutOfRange(ValidationError):
    module = "pbundle"


# cli
class SchemaError(ValidationError):
    module = "cli"

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path
