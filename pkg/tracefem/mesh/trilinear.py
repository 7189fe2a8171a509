"""
This module contains the piecewise trilinear nodal field on an octree grid and the trilinear (Q1) basis.
"""
from dataclasses import dataclass

import numpy as np

from tracefem.errors import PointOutsideCell
from tracefem.mesh.octree import OctreeGrid, CellKey, CORNER_OFFSETS

# Slack of the point-in-cell test in reference coordinates.
CELL_SLACK = 1e-12

# Per-corner selector of (1 - xi) or xi, and the sign of its derivative.
_BITS = CORNER_OFFSETS
_SIGNS = np.array([-1.0, 1.0])[CORNER_OFFSETS]


def basis_arrays(xi: np.ndarray, h: np.ndarray, hessians: bool = False):
    """
    Evaluate the 8 trilinear basis functions of cells at reference coordinates.
    Args:
        xi: Reference coordinates in [0, 1]^3, shape (..., 3).
        h: Cell sizes broadcastable to xi[..., 0].
        hessians: Also return the second derivatives.
    returns:
        values (..., 8), gradients (..., 8, 3) and, when requested, Hessians (..., 8, 3, 3).
    """
    factors = np.stack([1.0 - xi, xi], axis=-1)
    fx = factors[..., 0, :][..., _BITS[:, 0]]
    fy = factors[..., 1, :][..., _BITS[:, 1]]
    fz = factors[..., 2, :][..., _BITS[:, 2]]
    sx, sy, sz = _SIGNS[:, 0], _SIGNS[:, 1], _SIGNS[:, 2]
    inverse = 1.0 / np.asarray(h, dtype=float)[..., None]
    values = fx * fy * fz
    gradients = np.stack([sx * fy * fz, fx * sy * fz, fx * fy * sz], axis=-1) * inverse[..., None]
    if not hessians:
        return values, gradients
    hessian = np.zeros(values.shape + (3, 3))
    inverse2 = (inverse * inverse)
    hessian[..., 0, 1] = hessian[..., 1, 0] = sx * sy * fz * inverse2
    hessian[..., 0, 2] = hessian[..., 2, 0] = sx * fy * sz * inverse2
    hessian[..., 1, 2] = hessian[..., 2, 1] = fx * sy * sz * inverse2
    return values, gradients, hessian


def trilinear_basis(grid: OctreeGrid, cell: CellKey, x) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    The 8 basis values, gradients and Hessians of a leaf at a point.
    Args:
        grid: The grid.
        cell: The leaf.
        x: The point, inside the cell up to a relative slack of 1e-12.
    returns:
        values (8,), gradients (8, 3), Hessians (8, 3, 3), corners ordered as CORNER_OFFSETS.
    """
    h = grid.cell_size(cell.level)
    lower = grid.lower + np.array(cell.ijk, dtype=float) * h
    xi = (np.asarray(x, dtype=float) - lower) / h
    if np.any(xi < -CELL_SLACK) or np.any(xi > 1.0 + CELL_SLACK):
        raise PointOutsideCell(f'Point is outside cell {tuple(cell)} : "{x}"')
    return basis_arrays(np.clip(xi, 0.0, 1.0), h, hessians=True)


@dataclass
class TrilinearField:
    """
    Continuous piecewise trilinear function given by its nodal values; hanging nodes carry the constrained values.
    """
    grid: OctreeGrid
    values: np.ndarray

    def cell_values(self, cells: np.ndarray) -> np.ndarray:
        """
        Corner values of leaves given by index, shape (n, 8).
        """
        return self.values[self.grid.cell_nodes[cells]]

    def reference(self, cells: np.ndarray, points: np.ndarray) -> np.ndarray:
        cells = np.asarray(cells)
        return (points - self.grid.cell_lower[cells]) / self.grid.cell_h[cells][:, None]

    def evaluate(self, points: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        """
        Evaluate the field at points; the containing leaves are located when not given.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        cells = self.grid.locate(points) if cells is None else np.asarray(cells)
        xi = np.clip(self.reference(cells, points), 0.0, 1.0)
        values, _ = basis_arrays(xi, self.grid.cell_h[cells])
        return np.sum(values * self.cell_values(cells), axis=1)

    def gradient(self, points: np.ndarray, cells: np.ndarray | None = None) -> np.ndarray:
        points = np.atleast_2d(np.asarray(points, dtype=float))
        cells = self.grid.locate(points) if cells is None else np.asarray(cells)
        xi = np.clip(self.reference(cells, points), 0.0, 1.0)
        _, gradients = basis_arrays(xi, self.grid.cell_h[cells])
        return np.einsum('na,nad->nd', self.cell_values(cells), gradients)


def constrained_values(grid: OctreeGrid, nodal: np.ndarray) -> np.ndarray:
    """
    Replace the values at hanging nodes by the combination of their masters.
    """
    return grid.constraint @ np.asarray(nodal, dtype=float)


def interpolate_levelset(grid: OctreeGrid, ls) -> TrilinearField:
    """
    Nodal interpolant of the level set: phi at free nodes, constrained values at hanging nodes.
    Args:
        grid: The grid.
        ls: The level set.
    returns:
        The TrilinearField phi_h.
    """
    return TrilinearField(grid, constrained_values(grid, ls.evaluate(grid.node_points)))


def continuity_defect(field: TrilinearField) -> float:
    """
    Largest difference between the value at a hanging node and the trilinear evaluation of the field in the
    leaves around it; zero up to rounding for a conforming field.
    """
    grid = field.grid
    nodes = grid.hanging.nodes
    if len(nodes) == 0:
        return 0.0
    points = grid.node_points[nodes]
    offset = 0.25 * grid.fine_spacing
    defect = 0.0
    for corner in CORNER_OFFSETS:
        nudged = np.clip(points + offset * (2.0 * corner - 1.0), grid.lower, grid.upper)
        cells = grid.locate(nudged)
        values, _ = basis_arrays(np.clip(field.reference(cells, points), 0.0, 1.0), grid.cell_h[cells])
        evaluated = np.sum(values * field.cell_values(cells), axis=1)
        defect = max(defect, float(np.max(np.abs(evaluated - field.values[nodes]))))
    return defect
