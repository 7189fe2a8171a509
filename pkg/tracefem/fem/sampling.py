"""
This module contains the evaluation of a finite element function and its surface derivatives at the quadrature
points of the triangles of Gamma_h.
"""
from dataclasses import dataclass

import numpy as np

from tracefem.fem.quadrature import QuadratureRule
from tracefem.mesh.marching import SurfaceTriangulation
from tracefem.mesh.trilinear import basis_arrays
from tracefem.utils import projectors


@dataclass(eq=False)
class TriangleSamples:
    """
    Per triangle n and quadrature point q: points (n, q, 3), weights (n, q) including the triangle area,
    values (n, q), full gradients (n, q, 3), surface gradients P_T grad (n, q, 3) and, when requested, the
    discrete Laplace-Beltrami tr(P_T hess P_T) (n, q).
    """
    points: np.ndarray
    weights: np.ndarray
    values: np.ndarray
    gradients: np.ndarray
    surface_gradients: np.ndarray
    laplacian: np.ndarray | None = None


def sample_triangles(tri: SurfaceTriangulation, rule: QuadratureRule, corner_values: np.ndarray,
                     triangles=slice(None), hessians: bool = False) -> TriangleSamples:
    """
    Evaluate a trilinear function on triangles.
    Args:
        tri: The triangulation.
        rule: The triangle rule.
        corner_values: Corner values of the parent cell of every selected triangle, shape (n, 8).
        triangles: Selection of triangles (slice, index array or mask).
        hessians: Also compute the discrete Laplace-Beltrami of the function.
    returns:
        The TriangleSamples.
    """
    grid = tri.grid
    parents = tri.parents[triangles]
    h = grid.cell_h[parents]
    points = rule.physical_points(tri.corners[triangles])
    xi = np.clip((points - grid.cell_lower[parents][:, None, :]) / h[:, None, None], 0.0, 1.0)
    basis = basis_arrays(xi, h[:, None], hessians=hessians)
    projector = projectors(tri.normals[triangles])
    values = np.einsum('nqa,na->nq', basis[0], corner_values)
    gradients = np.einsum('nqad,na->nqd', basis[1], corner_values)
    laplacian = None
    if hessians:
        hessian = np.einsum('nqade,na->nqde', basis[2], corner_values)
        laplacian = np.einsum('nde,nqed->nq', projector, hessian)
    return TriangleSamples(points=points,
                           weights=tri.areas[triangles][:, None] * rule.weights[None, :],
                           values=values,
                           gradients=gradients,
                           surface_gradients=np.einsum('nde,nqe->nqd', projector, gradients),
                           laplacian=laplacian)
