"""
This module contains the legacy ASCII VTK export of grids and discrete surfaces.
The files are produced line by line by generators and written with write_lines.
"""
from typing import Iterator

import numpy as np

from tracefem.mesh.marching import SurfaceTriangulation
from tracefem.mesh.octree import OctreeGrid
from tracefem.utils import write_lines

# VTK cell types.
VTK_TRIANGLE = 5
VTK_HEXAHEDRON = 12

# Corner order of a VTK hexahedron in terms of the (bx, by, bz) corner numbering of the grid.
HEXAHEDRON_ORDER = [0, 1, 3, 2, 4, 5, 7, 6]


def _header(title: str, dataset: str) -> Iterator[str]:
    yield '# vtk DataFile Version 2.0'
    yield title
    yield 'ASCII'
    yield f'DATASET {dataset}'


def _points(points: np.ndarray) -> Iterator[str]:
    yield f'POINTS {len(points)} double'
    for x, y, z in points.tolist():
        yield f'{x!r} {y!r} {z!r}'


def _scalars(name: str, values: np.ndarray, fmt: str = 'double') -> Iterator[str]:
    yield f'SCALARS {name} {fmt} 1'
    yield 'LOOKUP_TABLE default'
    for value in np.asarray(values).tolist():
        yield repr(value)


def grid_lines(grid: OctreeGrid, title: str = 'tracefem grid') -> Iterator[str]:
    """
    Unstructured grid of the leaves with cell data level.
    """
    yield from _header(title, 'UNSTRUCTURED_GRID')
    yield from _points(grid.node_points)
    cells = grid.cell_nodes[:, HEXAHEDRON_ORDER]
    yield f'CELLS {len(cells)} {9 * len(cells)}'
    for cell in cells.tolist():
        yield '8 ' + ' '.join(str(node) for node in cell)
    yield f'CELL_TYPES {len(cells)}'
    for _ in range(len(cells)):
        yield str(VTK_HEXAHEDRON)
    yield f'CELL_DATA {len(cells)}'
    yield from _scalars('level', grid.levels, 'int')


def surface_lines(tri: SurfaceTriangulation, solution: np.ndarray | None = None,
                  title: str = 'tracefem surface') -> Iterator[str]:
    """
    Polydata of Gamma_h with the parent cell and normal of every triangle and, when given, the solution at the
    vertices.
    """
    yield from _header(title, 'POLYDATA')
    yield from _points(tri.vertices)
    yield f'POLYGONS {len(tri)} {4 * len(tri)}'
    for a, b, c in tri.triangles.tolist():
        yield f'3 {a} {b} {c}'
    yield f'CELL_DATA {len(tri)}'
    yield from _scalars('parent', tri.parents, 'int')
    yield 'NORMALS normal double'
    for x, y, z in tri.normals.tolist():
        yield f'{x!r} {y!r} {z!r}'
    if solution is not None:
        yield f'POINT_DATA {len(tri.vertices)}'
        yield from _scalars('solution', solution)


def write_grid(path: str, grid: OctreeGrid) -> str:
    return write_lines(path, grid_lines(grid))


def write_surface(path: str, tri: SurfaceTriangulation, solution: np.ndarray | None = None) -> str:
    return write_lines(path, surface_lines(tri, solution))
