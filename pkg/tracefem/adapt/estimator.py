"""
This module contains the residual error indicators of a trace finite element solution and the maximum marking.

Per triangle T with parent cell size h:
    eta_R(T)^2 = h^2 |f + eps Lap_h u_h - (c + div_h w) u_h - w . grad_h u_h|^2_T
    eta_E(T)^2 = sum over edges of T of h (|[eps grad_h u_h]|^2_e + |w . [m_h]|^2_e)
    eta_G(T)^2 = h^4 |H|^2 (|f|^2_T + |u_h|^2_H1(T))
Cell indicators sum the weighted parts of their triangles.
"""
from dataclasses import dataclass

import numpy as np

from tracefem.errors import UnknownEstimatorMode, NothingToMark
from tracefem.fem.dofs import DofMap
from tracefem.fem.quadrature import QuadratureRule, line_rule, triangle_rule
from tracefem.fem.sampling import sample_triangles
from tracefem.geometry.differential import normal_hessian
from tracefem.geometry.problem import SurfaceProblem
from tracefem.mesh.marching import SurfaceTriangulation
from tracefem.mesh.octree import CellKey
from tracefem.mesh.trilinear import basis_arrays
from tracefem.utils import logging, unit_vectors, projectors

MODES = ('elliptic', 'advection')


@dataclass(eq=False)
class EstimatorParts:
    """
    Squared indicator parts per triangle.
    """
    residual: np.ndarray
    edge: np.ndarray
    geometric: np.ndarray
    parents: np.ndarray
    h: np.ndarray


@dataclass
class CellIndicator:
    cell: CellKey
    residual: float
    edge: float
    geometric: float
    eta: float
    weights: tuple[float, float, float]


def eta_residual(tri: SurfaceTriangulation, u: np.ndarray, problem: SurfaceProblem, dofs: DofMap,
                 quad: QuadratureRule | None = None) -> np.ndarray:
    """
    The element residual part eta_R(T)^2 of every triangle.
    """
    rule = quad or triangle_rule(4)
    samples = sample_triangles(tri, rule, dofs.corner_values(u, tri.parents), hessians=True)
    n, q = samples.values.shape
    flat = samples.points.reshape(-1, 3)
    data = problem.surface_data(flat)
    residual = data.rhs.reshape(n, q) + problem.eps * samples.laplacian \
        - data.reaction.reshape(n, q) * samples.values
    if data.velocity is not None:
        velocity = data.velocity.reshape(n, q, 3)
        jacobian = problem.velocity_jacobian(flat).reshape(n, q, 3, 3)
        divergence = np.einsum('nde,nqed->nq', projectors(tri.normals), jacobian)
        residual -= divergence * samples.values + np.sum(velocity * samples.surface_gradients, axis=2)
    return tri.cell_h ** 2 * np.sum(samples.weights * residual ** 2, axis=1)


def conormals(tri: SurfaceTriangulation, edges: np.ndarray, owners: np.ndarray) -> np.ndarray:
    """
    In-plane outward unit normals of the owner triangles at the given edges, shape (m, 3).
    """
    a, b = tri.vertices[edges[:, 0]], tri.vertices[edges[:, 1]]
    direction = unit_vectors(b - a)[0]
    m = unit_vectors(np.cross(direction, tri.normals[owners]))[0]
    outward = np.sum(m * (0.5 * (a + b) - tri.barycenters[owners]), axis=1)
    return np.where(outward[:, None] < 0.0, -m, m)


def _edge_gradients(tri: SurfaceTriangulation, corner_values: np.ndarray, owners: np.ndarray,
                    points: np.ndarray) -> np.ndarray:
    """
    Surface gradients P_T grad u_h at edge points (m, g, 3), evaluated in the parent cells of the owners.
    """
    grid = tri.grid
    parents = tri.parents[owners]
    h = grid.cell_h[parents]
    xi = np.clip((points - grid.cell_lower[parents][:, None, :]) / h[:, None, None], 0.0, 1.0)
    _, gradients = basis_arrays(xi, h[:, None])
    gradient = np.einsum('ngad,na->ngd', gradients, corner_values[owners])
    return np.einsum('nde,nge->ngd', projectors(tri.normals[owners]), gradient)


def eta_edge(tri: SurfaceTriangulation, u: np.ndarray, problem: SurfaceProblem, dofs: DofMap,
             conormal: bool = True, points_per_edge: int = 3) -> np.ndarray:
    """
    The edge jump part eta_E(T)^2 of every triangle.
    Args:
        tri: The triangulation; it must be closed.
        u: The dof vector of u_h.
        problem: The problem (eps and w).
        dofs: The dof map.
        conormal: Keep the w . [m_h] term.
        points_per_edge: Gauss points per edge.
    returns:
        The (n,) array of squared indicators.
    """
    edges, owners = tri.edge_table
    corner_values = dofs.corner_values(u, tri.parents)
    nodes, weights = line_rule(points_per_edge)
    a, b = tri.vertices[edges[:, 0]], tri.vertices[edges[:, 1]]
    length = np.linalg.norm(b - a, axis=1)
    points = a[:, None, :] + nodes[None, :, None] * (b - a)[:, None, :]

    first = _edge_gradients(tri, corner_values, owners[:, 0], points)
    second = _edge_gradients(tri, corner_values, owners[:, 1], points)
    integrand = np.sum((problem.eps * (first - second)) ** 2, axis=2)
    if conormal and problem.has_velocity:
        jump = conormals(tri, edges, owners[:, 0]) + conormals(tri, edges, owners[:, 1])
        velocity = problem.velocity(points.reshape(-1, 3)).reshape(points.shape)
        integrand = integrand + np.einsum('ngd,nd->ng', velocity, jump) ** 2
    integral = length * (integrand @ weights)

    h = tri.cell_h
    result = np.zeros(len(tri))
    np.add.at(result, owners[:, 0], h[owners[:, 0]] * integral)
    np.add.at(result, owners[:, 1], h[owners[:, 1]] * integral)
    return result


def eta_geometric(tri: SurfaceTriangulation, u: np.ndarray, problem: SurfaceProblem, dofs: DofMap,
                  quad: QuadratureRule | None = None) -> np.ndarray:
    """
    The geometric part eta_G(T)^2 of every triangle, with the shape operator taken at the barycenter.
    """
    rule = quad or triangle_rule(4)
    samples = sample_triangles(tri, rule, dofs.corner_values(u, tri.parents))
    n, q = samples.values.shape
    f = problem.rhs(samples.points.reshape(-1, 3)).reshape(n, q)
    hessian = normal_hessian(problem.level_set, tri.barycenters).hessian_of_distance
    curvature = np.sum(hessian ** 2, axis=(1, 2))
    norms = np.sum(samples.weights * (f ** 2 + samples.values ** 2
                                      + np.sum(samples.surface_gradients ** 2, axis=2)), axis=1)
    return tri.cell_h ** 4 * curvature * norms


def estimate(tri: SurfaceTriangulation, u: np.ndarray, problem: SurfaceProblem, dofs: DofMap,
             quad: QuadratureRule | None = None, conormal: bool = True) -> EstimatorParts:
    """
    All indicator parts of a solution.
    """
    return EstimatorParts(residual=eta_residual(tri, u, problem, dofs, quad),
                          edge=eta_edge(tri, u, problem, dofs, conormal),
                          geometric=eta_geometric(tri, u, problem, dofs, quad),
                          parents=tri.parents,
                          h=tri.cell_h)


def indicator_weights(h, eps: float, mode: str = 'elliptic', alpha_g: float = 0.0):
    """
    Weights (alpha_r, alpha_e, alpha_g) for cells of size h.
    Elliptic mode uses unit weights; advection mode uses alpha_r = min(1/eps, h^-2),
    alpha_e = min(1/eps, h^-1 eps^-1/2) and alpha_g = 0.
    """
    if mode not in MODES:
        raise UnknownEstimatorMode(f'Unknown estimator mode : "{mode}"')
    h = np.asarray(h, dtype=float)
    if mode == 'elliptic':
        one = np.ones_like(h)
        return one, one, alpha_g * one
    alpha_r = np.minimum(1.0 / eps, h ** -2)
    alpha_e = np.minimum(1.0 / eps, 1.0 / (h * np.sqrt(eps)))
    return alpha_r, alpha_e, np.zeros_like(h)


def combine_and_weight(parts: EstimatorParts, grid, eps: float, mode: str = 'elliptic',
                       alpha_g: float = 0.0) -> list[CellIndicator]:
    """
    Aggregate the triangle parts per cell and weight them.
    Args:
        parts: The squared parts per triangle.
        grid: The grid of the triangulation.
        eps: Diffusion coefficient of the problem.
        mode: elliptic or advection.
        alpha_g: Weight of the geometric part in elliptic mode.
    returns:
        One CellIndicator per cell of the band, ordered by leaf index.
    """
    cells, inverse = np.unique(parts.parents, return_inverse=True)
    sums = [np.bincount(inverse, weights=part, minlength=len(cells))
            for part in (parts.residual, parts.edge, parts.geometric)]
    alpha_r, alpha_e, alpha_geo = indicator_weights(grid.cell_h[cells], eps, mode, alpha_g)
    squared = alpha_r * sums[0] + alpha_e * sums[1] + alpha_geo * sums[2]
    return [CellIndicator(cell=grid.leaves[cell],
                          residual=float(sums[0][n]),
                          edge=float(sums[1][n]),
                          geometric=float(sums[2][n]),
                          eta=float(np.sqrt(squared[n])),
                          weights=(float(alpha_r[n]), float(alpha_e[n]), float(alpha_geo[n])))
            for n, cell in enumerate(cells.tolist())]


def mark_maximum(indicators: list[CellIndicator], fraction: float = 0.5) -> set[CellKey]:
    """
    Cells whose indicator reaches the given fraction of the largest one (ties included).
    """
    if not indicators:
        raise NothingToMark('No indicators to mark')
    largest = max(indicator.eta for indicator in indicators)
    marked = {indicator.cell for indicator in indicators if indicator.eta >= fraction * largest}
    logging.info(f'Marked {len(marked)} of {len(indicators)} cells')
    return marked
