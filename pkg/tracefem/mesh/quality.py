"""
This module contains the quality measures of an extracted surface: distance and normal deviation from the
exact surface, and the audits of the triangulation invariants.
"""
from dataclasses import dataclass

import numpy as np

from tracefem.errors import TraceFemError
from tracefem.fem.quadrature import triangle_rule
from tracefem.geometry.differential import closest_point_project
from tracefem.mesh.marching import SurfaceTriangulation
from tracefem.mesh.trilinear import TrilinearField, CELL_SLACK
from tracefem.utils import unit_vectors


@dataclass
class GeometryQuality:
    max_distance: float
    max_normal_error: float
    area: float


def geometry_quality(tri: SurfaceTriangulation, ls, degree: int = 4) -> GeometryQuality:
    """
    Maxima over the triangle quadrature points of |x - p(x)| and |n(p(x)) - n_h|.
    Args:
        tri: The triangulation.
        ls: The exact level set.
        degree: Degree of the sampling rule.
    returns:
        The GeometryQuality of the triangulation.
    """
    rule = triangle_rule(degree)
    points = rule.physical_points(tri.corners).reshape(-1, 3)
    projected = closest_point_project(ls, points)
    normal, _ = unit_vectors(ls.gradient(projected))
    normal_h = np.repeat(tri.normals, len(rule), axis=0)
    return GeometryQuality(max_distance=float(np.max(np.linalg.norm(points - projected, axis=1))),
                           max_normal_error=float(np.max(np.linalg.norm(normal - normal_h, axis=1))),
                           area=tri.total_area)


def audit_watertight(tri: SurfaceTriangulation) -> bool:
    """
    True when every edge has exactly two incident triangles.
    """
    try:
        tri.edge_table
    except TraceFemError:
        return False
    return True


def audit_containment(tri: SurfaceTriangulation) -> bool:
    """
    True when every triangle barycenter lies in its parent cell up to the cell slack.
    """
    xi = (tri.barycenters - tri.grid.cell_lower[tri.parents]) / tri.cell_h[:, None]
    return bool(np.all(xi >= -CELL_SLACK) and np.all(xi <= 1.0 + CELL_SLACK))


def audit_orientation(tri: SurfaceTriangulation, field: TrilinearField) -> bool:
    """
    True when n_h . grad phi_h(barycenter) > 0 on every triangle with a nonzero gradient.
    """
    gradient = field.gradient(tri.barycenters, tri.parents)
    dots = np.sum(tri.normals * gradient, axis=1)
    return bool(np.all((dots > 0.0) | (np.linalg.norm(gradient, axis=1) == 0.0)))


def max_vertex_value(tri: SurfaceTriangulation, field: TrilinearField) -> float:
    """
    Largest |phi_h| at the triangle vertices relative to max |phi_h|.
    """
    corners = tri.corners.reshape(-1, 3)
    values = field.evaluate(corners, np.repeat(tri.parents, 3))
    scale = max(float(np.max(np.abs(field.values))), 1e-300)
    return float(np.max(np.abs(values))) / scale
