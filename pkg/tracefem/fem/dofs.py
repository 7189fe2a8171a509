"""
This module contains the map between the active trace degrees of freedom and the grid nodes.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from tracefem.errors import EmptyTriangulation
from tracefem.mesh.marching import SurfaceTriangulation
from tracefem.mesh.octree import OctreeGrid


@dataclass(eq=False)
class DofMap:
    """
    Active unconstrained nodes of the trace space.
    nodes[d] is the grid node of dof d; expansion is the (vertex_count, n_dofs) matrix giving the value of every
    grid node, hanging or not, from the dof vector (zero rows for inactive nodes).
    """
    grid: OctreeGrid
    cells: np.ndarray
    nodes: np.ndarray
    expansion: scipy.sparse.csr_matrix

    def __len__(self):
        return len(self.nodes)

    @property
    def points(self) -> np.ndarray:
        return self.grid.node_points[self.nodes]

    @property
    def node_to_dof(self) -> np.ndarray:
        mapping = np.full(self.grid.vertex_count, -1, dtype=np.int64)
        mapping[self.nodes] = np.arange(len(self.nodes))
        return mapping

    @property
    def constrained_nodes(self) -> np.ndarray:
        """
        Hanging corner nodes of the band cells, whose values are eliminated into their masters.
        """
        corners = np.unique(self.grid.cell_nodes[self.cells])
        return corners[~self.grid.free_mask[corners]]

    def nodal(self, u: np.ndarray) -> np.ndarray:
        """
        Values at all grid nodes of the finite element function with dof vector u.
        """
        return self.expansion @ np.asarray(u, dtype=float)

    def corner_values(self, u: np.ndarray, cells: np.ndarray) -> np.ndarray:
        """
        Corner values (n, 8) of leaves given by index.
        """
        return self.nodal(u)[self.grid.cell_nodes[cells]]

    def interpolate(self, function) -> np.ndarray:
        """
        Nodal interpolant: the dof vector holding function values at the dof nodes.
        """
        return np.asarray(function(self.points), dtype=float)


def build_dof_map(grid: OctreeGrid, tri: SurfaceTriangulation) -> DofMap:
    """
    Collect the dofs of the trace space: the corner nodes of the cells containing triangles, with hanging
    corners replaced by the free nodes they are resolved to.
    Args:
        grid: The grid.
        tri: The triangulation extracted on the grid.
    returns:
        The DofMap.
    """
    if len(tri) == 0:
        raise EmptyTriangulation('The triangulation has no triangles')
    cells = tri.cells
    corners = np.unique(grid.cell_nodes[cells])
    constraint = grid.constraint
    masters = constraint[corners].tocoo().col
    nodes = np.unique(masters)
    expansion = constraint[:, nodes].tocsr()
    # Keep only the rows the band cells need.
    keep = np.zeros(grid.vertex_count)
    keep[corners] = 1.0
    expansion = (scipy.sparse.diags(keep) @ expansion).tocsr()
    expansion.eliminate_zeros()
    return DofMap(grid=grid, cells=cells, nodes=nodes, expansion=expansion)
