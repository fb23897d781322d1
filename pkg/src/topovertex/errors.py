"""Exception hierarchy shared by all modules."""


class TopoVertexError(Exception):
    """Base class for all package errors."""


class DimensionError(TopoVertexError, ValueError):
    pass


class ParameterError(TopoVertexError, ValueError):
    pass


class GeometryError(TopoVertexError, ValueError):
    """Inclusion does not fit the domain or the grid cannot resolve it."""


class ShapeDegeneracyError(GeometryError):
    """Ray fan cannot be enlarged into a simple polygon."""


class ConsistencyError(TopoVertexError, ValueError):
    """Data computed under different parameters were mixed."""


class StaleCacheError(ConsistencyError):
    pass


class SolverError(TopoVertexError, RuntimeError):
    """Conjugate gradients did not reach the requested tolerance."""

    def __init__(self, message, residual=None, iterations=None):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
