"""Exception hierarchy shared by all modules."""


class PackingError(Exception):
    """Base class for every error raised by this package."""


# complex
class ComplexError(PackingError, ValueError):
    pass


class NonManifold(ComplexError):
    pass


class InconsistentOrientation(ComplexError):
    pass


class Disconnected(ComplexError):
    pass


class NotABoundaryCycle(ComplexError):
    pass


class NotASphere(ComplexError):
    pass


# geom
class GeometryError(PackingError, ValueError):
    pass


class NonPositiveRadius(GeometryError):
    pass


class InfiniteApexRadius(GeometryError):
    pass


class TriangleTooLarge(GeometryError):
    pass


class ImageIsLine(GeometryError):
    pass


class DegenerateInput(GeometryError):
    pass


# label / layout
class NoInteriorVertices(PackingError, ValueError):
    pass


class BoundaryVertex(PackingError, ValueError):
    pass


class MaxIterExceeded(PackingError, RuntimeError):
    """Raised only when the caller asks for strict convergence.

    Carries the best label and its report so nothing computed is lost.
    """

    def __init__(self, message, label=None, report=None):
        super().__init__(message)
        self.label = label
        self.report = report


class UnconvergedLabel(PackingError, ValueError):
    pass


class DegenerateTriple(PackingError, ValueError):
    pass


class MismatchedComplexes(PackingError, ValueError):
    pass


class DegenerateFace(PackingError, ValueError):
    pass


# cookie
class DomainError(PackingError, ValueError):
    pass


class NoInterior(DomainError):
    pass


class ComponentNotSeparated(DomainError):
    def __init__(self, component, message=None):
        self.component = component
        super().__init__(message or f"complementary component {component} is not separated by the cut-out")


class Empty(DomainError):
    pass


# weld
class WeldError(PackingError, ValueError):
    pass


class IncompatibleOrientation(WeldError):
    pass


class EmptyParam(WeldError):
    pass


class AngleSumNot2Pi(WeldError):
    pass


# pipeline
class StageError(PackingError, RuntimeError):
    """Wraps a failure with the name of the pipeline stage that produced it."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")


class NotSphereAfterWelds(PackingError, RuntimeError):
    pass


class MissingComponent(PackingError, KeyError):
    pass
