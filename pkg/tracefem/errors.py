"""
This module contains the exceptions raised by the tracefem modules.
Every error carries a readable message; some carry the offending value as an attribute.
"""


class TraceFemError(Exception):
    """
    Base class of all numeric and geometric failures. Commands exit with code 1 on these.
    """


class ConfigError(TraceFemError):
    """
    Invalid configuration or command line. Commands exit with code 2 on these.
    """


class InsufficientLevels(ConfigError):
    pass


class UnknownVariant(ConfigError):
    pass


class UnknownSolverMethod(ConfigError):
    pass


class UnknownEstimatorMode(ConfigError):
    pass


class UnsupportedQuadratureDegree(ConfigError):
    pass


class InvalidStrip(ConfigError):
    """
    Shishkin strip parameters that cannot describe a layer-fitted grid.
    """


class InvalidPoints(TraceFemError):
    pass


# geometry


class NonConvergence(TraceFemError):
    pass


class DegenerateGradient(TraceFemError):
    pass


class UnknownProblemId(ConfigError):
    pass


# octree


class NonDivisibleResolution(TraceFemError):
    pass


class MaxLevelExceeded(TraceFemError):

    def __init__(self, level_cap: int):
        super().__init__(f'Refinement exceeds the level cap : "{level_cap}"')
        self.level_cap = level_cap


class EmptyBand(TraceFemError):
    pass


# surface mesh


class DegenerateCell(TraceFemError):
    pass


class NonManifoldEdge(TraceFemError):
    pass


# fem


class PointOutsideCell(TraceFemError):
    pass


class EmptyTriangulation(TraceFemError):
    pass


class NonFiniteEntry(TraceFemError):
    pass


class NotApplicable(TraceFemError):
    pass


# solver


class IncompatibleShapes(TraceFemError):
    pass


class SingularMatrix(TraceFemError):

    def __init__(self, message: str, dof: int | None = None):
        super().__init__(message)
        self.dof = dof


class NoConvergence(TraceFemError):

    def __init__(self, iterations: int, residual: float):
        super().__init__(f'Iterative solve did not converge after {iterations} iterations : "{residual:.3e}"')
        self.iterations = iterations
        self.residual = residual


class ZeroDiagonal(TraceFemError):

    def __init__(self, dofs: list[int]):
        super().__init__(f'Zero diagonal entries : "{dofs}"')
        self.dofs = dofs


# estimator and analysis


class BoundaryEdge(TraceFemError):
    pass


class NothingToMark(TraceFemError):
    pass


class MissingExactSolution(TraceFemError):
    pass


class EmptyRegion(TraceFemError):
    pass


class AuditFailure(TraceFemError):
    pass
