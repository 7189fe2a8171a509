"""
This module contains the error norms of a discrete solution against the normal extension of the exact one,
measured on Gamma_h by triangle quadrature.
"""
from dataclasses import dataclass, field, asdict
from typing import Callable

import numpy as np

from tracefem.errors import EmptyRegion, MissingExactSolution
from tracefem.fem.dofs import DofMap
from tracefem.fem.quadrature import QuadratureRule, triangle_rule
from tracefem.fem.sampling import sample_triangles
from tracefem.geometry.problem import SurfaceProblem
from tracefem.mesh.marching import SurfaceTriangulation
from tracefem.utils import projectors


@dataclass
class ErrorReport:
    dofs: int
    h_max: float
    l2: float
    h1_semi: float
    h1: float
    linf: float
    triangles: int
    region: str = 'all'
    metadata: dict = field(default_factory=lambda: {'linf': 'max over quadrature points'})

    def as_row(self) -> dict:
        row = asdict(self)
        row.pop('metadata')
        return row


def error_norms(u: np.ndarray, problem: SurfaceProblem, tri: SurfaceTriangulation, dofs: DofMap,
                quad: QuadratureRule | None = None, triangles=None, region: str = 'all') -> ErrorReport:
    """
    L2, H1 and Linf norms of u^e - u_h on Gamma_h.
    Args:
        u: The dof vector of u_h.
        problem: A problem with an exact solution.
        tri: The triangulation.
        dofs: The dof map.
        quad: The triangle rule (degree 4 by default).
        triangles: Optional index array restricting the norms to some triangles.
        region: Name of the region, stored in the report.
    returns:
        The ErrorReport.
    """
    if not problem.has_exact_solution:
        raise MissingExactSolution(f'Problem has no exact solution : "{problem.problem_id}"')
    rule = quad or triangle_rule(4)
    selection = np.arange(len(tri)) if triangles is None else np.asarray(triangles)
    samples = sample_triangles(tri, rule, dofs.corner_values(u, tri.parents[selection]), selection)
    n, q = samples.values.shape
    points = samples.points.reshape(-1, 3)
    exact = problem.exact_solution(points).reshape(n, q)
    gradient = problem.exact_surface_gradient(points).reshape(n, q, 3)
    gradient = np.einsum('nde,nqe->nqd', projectors(tri.normals[selection]), gradient)

    difference = exact - samples.values
    l2 = float(np.sqrt(np.sum(samples.weights * difference ** 2)))
    semi = float(np.sqrt(np.sum(samples.weights * np.sum((gradient - samples.surface_gradients) ** 2, axis=2))))
    return ErrorReport(dofs=len(dofs),
                       h_max=float(np.max(tri.cell_h)),
                       l2=l2,
                       h1_semi=semi,
                       h1=float(np.hypot(l2, semi)),
                       linf=float(np.max(np.abs(difference))),
                       triangles=len(selection),
                       region=region)


def restricted_error(u: np.ndarray, problem: SurfaceProblem, tri: SurfaceTriangulation, dofs: DofMap,
                     predicate: Callable[[np.ndarray], np.ndarray], quad: QuadratureRule | None = None,
                     region: str = 'restricted') -> ErrorReport:
    """
    Error norms over the triangles whose barycenter satisfies the predicate.
    """
    selection = np.flatnonzero(predicate(tri.barycenters))
    if len(selection) == 0:
        raise EmptyRegion(f'No triangle in region : "{region}"')
    return error_norms(u, problem, tri, dofs, quad, selection, region)


def exterior_region(threshold: float) -> Callable[[np.ndarray], np.ndarray]:
    """
    Predicate of the region |x_3| > threshold.
    """
    return lambda x: np.abs(x[:, 2]) > threshold


def nodal_interpolant(problem: SurfaceProblem, dofs: DofMap) -> np.ndarray:
    """
    Dof vector of the nodal interpolant of u^e = u o p.
    """
    return dofs.interpolate(problem.exact_solution)
