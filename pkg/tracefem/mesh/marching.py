"""
This module contains the extraction of the discrete surface Gamma_h, the zero set of a trilinear field,
as a crack-free triangulation in which every triangle belongs to exactly one leaf cell.

Inside each cut cell the contour is traced on the cell faces by marching squares (bilinear restriction per face,
asymptotic decider for ambiguous faces). Faces shared with finer neighbours are traced on the neighbours' sub-faces
and edges holding hanging nodes are traced on their halves, so both sides of every interface produce the same
segments. Every face and every edge vertex is computed once and cached by lattice key.
"""
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from tracefem.errors import BoundaryEdge, DegenerateCell, EmptyBand, NonManifoldEdge
from tracefem.mesh.octree import OctreeGrid, CellKey
from tracefem.mesh.trilinear import TrilinearField, basis_arrays
from tracefem.utils import logging, unit_vectors

# Corner values below this fraction of the field scale are nudged positive.
NUDGE = 1e-14
# Shift applied once when a whole cell has vanishing corner values.
RETRY_SHIFT = 1e-12


@dataclass(eq=False)
class SurfaceTriangulation:
    """
    Planar triangles forming Gamma_h. parents[t] is the index in grid.leaves of the cell containing triangle t,
    normals[t] the unit normal oriented along grad phi_h.
    """
    grid: OctreeGrid
    vertices: np.ndarray
    triangles: np.ndarray
    parents: np.ndarray
    normals: np.ndarray
    areas: np.ndarray

    def __len__(self):
        return len(self.triangles)

    @property
    def parent_keys(self) -> list[CellKey]:
        return [self.grid.leaves[n] for n in self.parents.tolist()]

    @property
    def total_area(self) -> float:
        return float(np.sum(self.areas))

    @cached_property
    def corners(self) -> np.ndarray:
        """
        Vertex coordinates of every triangle, shape (n, 3, 3).
        """
        return self.vertices[self.triangles]

    @cached_property
    def barycenters(self) -> np.ndarray:
        return self.corners.mean(axis=1)

    @cached_property
    def cells(self) -> np.ndarray:
        """
        Sorted leaf indices of the cells containing triangles (omega_h).
        """
        return np.unique(self.parents)

    @cached_property
    def cell_h(self) -> np.ndarray:
        """
        Size of the parent cell of every triangle.
        """
        return self.grid.cell_h[self.parents]

    def triangles_per_cell(self) -> np.ndarray:
        return np.bincount(self.parents, minlength=len(self.grid))[self.cells]

    @cached_property
    def edge_table(self) -> tuple[np.ndarray, np.ndarray]:
        """
        Undirected edges (sorted vertex pairs) and their two incident triangles.
        returns:
            edges (m, 2) and edge_triangles (m, 2).
        """
        triangles = self.triangles
        pairs = np.concatenate([triangles[:, [0, 1]], triangles[:, [1, 2]], triangles[:, [2, 0]]])
        owners = np.tile(np.arange(len(triangles)), 3)
        pairs = np.sort(pairs, axis=1)
        keys = pairs[:, 0] * np.int64(len(self.vertices)) + pairs[:, 1]
        order = np.argsort(keys, kind='stable')
        _, first, counts = np.unique(keys[order], return_index=True, return_counts=True)
        if np.any(counts == 1):
            edge = pairs[order][first[np.argmax(counts == 1)]]
            raise BoundaryEdge(f'Edge with a single incident triangle : "{tuple(edge)}"')
        if np.any(counts > 2):
            edge = pairs[order][first[np.argmax(counts > 2)]]
            raise NonManifoldEdge(f'Edge with more than two incident triangles : "{tuple(edge)}"')
        return pairs[order][first], owners[order].reshape(-1, 2)

    @property
    def euler_characteristic(self) -> int:
        edges, _ = self.edge_table
        used = len(np.unique(self.triangles))
        return used - len(edges) + len(self.triangles)


def extract_surface(grid: OctreeGrid, field: TrilinearField) -> SurfaceTriangulation:
    """
    Triangulate the zero set of a trilinear field.
    Args:
        grid: The grid of the field.
        field: The level-set interpolant phi_h.
    returns:
        The SurfaceTriangulation of Gamma_h.
    """
    values = np.array(field.values, dtype=float)
    scale = float(np.max(np.abs(values))) if len(values) else 1.0
    scale = scale if scale > 0.0 else 1.0
    flat = np.all(np.abs(values[grid.cell_nodes]) < NUDGE * scale, axis=1)
    if np.any(flat):
        logging.warning(f'{int(flat.sum())} cells have vanishing corner values, shifting the field by '
                        f'{RETRY_SHIFT:g} x scale')
        values = values + RETRY_SHIFT * scale
        if np.any(np.all(np.abs(values[grid.cell_nodes]) < NUDGE * scale, axis=1)):
            raise DegenerateCell(f'Cells with all corner values zero : "{int(flat.sum())}"')
    values = np.where(np.abs(values) < NUDGE * scale, NUDGE * scale, values)

    corners = values[grid.cell_nodes]
    cut = np.flatnonzero((corners.min(axis=1) < 0.0) & (corners.max(axis=1) > 0.0))
    if len(cut) == 0:
        raise EmptyBand(f'The zero set does not cut the grid : "{grid}"')

    extractor = _CellExtractor(grid, values, scale)
    for cell in cut.tolist():
        extractor.add_cell(cell)
    return extractor.build()


class _CellExtractor:
    """
    Accumulates the triangles of the cut cells with shared, lattice-keyed vertices.
    """

    def __init__(self, grid: OctreeGrid, values: np.ndarray, scale: float):
        self.grid = grid
        self.values = values
        self.scale = scale
        self.value_of: dict[int, float] = dict(zip(grid.node_keys.tolist(), values.tolist()))
        self.stride = grid.lattice_size + 1
        self.edge_vertices: dict[tuple[int, int], int] = {}
        self.face_segments: dict[tuple, list[tuple[int, int]]] = {}
        self.points: list[tuple[float, float, float]] = []
        self.triangles: list[tuple[int, int, int]] = []
        self.parents: list[int] = []

    def key(self, p: tuple[int, int, int]) -> int:
        return p[0] + self.stride * (p[1] + self.stride * p[2])

    def world(self, p, t: float = 0.0, q=None) -> tuple[float, float, float]:
        spacing, lower = self.grid.fine_spacing, self.grid.lower
        if q is None:
            return tuple(lower + spacing * c for c in p)
        return tuple(lower + spacing * (a + t * (b - a)) for a, b in zip(p, q))

    def edge_vertex(self, a, b, fa: float, fb: float) -> int:
        ka, kb = self.key(a), self.key(b)
        if ka > kb:
            a, b, fa, fb, ka, kb = b, a, fb, fa, kb, ka
        vertex = self.edge_vertices.get((ka, kb))
        if vertex is None:
            vertex = len(self.points)
            self.points.append(self.world(a, fa / (fa - fb), b))
            self.edge_vertices[(ka, kb)] = vertex
        return vertex

    def side_crossing(self, a, b) -> int | None:
        """
        The contour vertex on the straight side a-b of a face, tracing its halves when the midpoint is a node.
        """
        length = max(abs(x - y) for x, y in zip(a, b))
        pieces = [(a, b)]
        if length % 2 == 0:
            middle = tuple((x + y) // 2 for x, y in zip(a, b))
            if self.key(middle) in self.value_of:
                pieces = [(a, middle), (middle, b)]
        crossing = None
        for p, q in pieces:
            fp, fq = self.value_of[self.key(p)], self.value_of[self.key(q)]
            if (fp < 0.0) != (fq < 0.0):
                if crossing is not None:
                    raise NonManifoldEdge(f'Two contour crossings on one cell edge : "{a} {b}"')
                crossing = self.edge_vertex(p, q, fp, fq)
        return crossing

    def segments(self, axis: int, level: int, u0: int, v0: int, size: int) -> list[tuple[int, int]]:
        """
        Contour segments of the elementary face {x_axis = level} x [u0, u0+size] x [v0, v0+size].
        """
        face = (axis, level, u0, v0, size)
        cached = self.face_segments.get(face)
        if cached is not None:
            return cached
        u, v = [d for d in range(3) if d != axis]

        def point(du, dv):
            p = [0, 0, 0]
            p[axis], p[u], p[v] = level, u0 + du, v0 + dv
            return tuple(p)

        c00, c10, c11, c01 = point(0, 0), point(size, 0), point(size, size), point(0, size)
        sides = [self.side_crossing(c00, c10), self.side_crossing(c10, c11),
                 self.side_crossing(c11, c01), self.side_crossing(c01, c00)]
        found = [s for s in sides if s is not None]
        if len(found) == 0:
            result = []
        elif len(found) == 2:
            result = [(found[0], found[1])]
        elif len(found) == 4:
            f00, f10, f11, f01 = (self.value_of[self.key(c)] for c in (c00, c10, c11, c01))
            saddle = (f00 * f11 - f10 * f01) / (f00 + f11 - f10 - f01)
            bottom, right, top, left = sides
            if (saddle >= 0.0) == (f00 > 0.0):
                result = [(bottom, right), (top, left)]
            else:
                result = [(left, bottom), (right, top)]
        else:
            raise NonManifoldEdge(f'Odd number of contour crossings on a face : "{face}"')
        self.face_segments[face] = result
        return result

    def add_cell(self, cell: int):
        grid = self.grid
        origin = tuple(int(c) for c in grid.lattice_origins[cell])
        size = int(grid.lattice_sizes[cell])
        half = size // 2
        segments = []
        for axis in range(3):
            u, v = [d for d in range(3) if d != axis]
            for side in (0, 1):
                level = origin[axis] + side * size
                center = [0, 0, 0]
                center[axis], center[u], center[v] = level, origin[u] + half, origin[v] + half
                if size > 1 and self.key(tuple(center)) in self.value_of:
                    for du in (0, half):
                        for dv in (0, half):
                            segments += self.segments(axis, level, origin[u] + du, origin[v] + dv, half)
                else:
                    segments += self.segments(axis, level, origin[u], origin[v], size)
        if not segments:
            return
        for loop in self.loops(segments, cell):
            self.triangulate(loop, cell)

    @staticmethod
    def loops(segments: list[tuple[int, int]], cell: int) -> list[list[int]]:
        neighbours = defaultdict(list)
        for a, b in segments:
            neighbours[a].append(b)
            neighbours[b].append(a)
        if any(len(n) != 2 for n in neighbours.values()):
            raise NonManifoldEdge(f'Open contour inside cell : "{cell}"')
        visited = set()
        loops = []
        for start in sorted(neighbours):
            if start in visited:
                continue
            loop, previous, current = [start], None, start
            visited.add(start)
            while True:
                a, b = neighbours[current]
                following = b if a == previous else a
                if following == start:
                    break
                loop.append(following)
                visited.add(following)
                previous, current = current, following
            loops.append(loop)
        return loops

    def triangulate(self, loop: list[int], cell: int):
        count = len(loop)
        if count == 3:
            fan = [tuple(loop)]
        elif count == 4:
            p = [np.array(self.points[i]) for i in loop]
            if np.linalg.norm(p[0] - p[2]) <= np.linalg.norm(p[1] - p[3]):
                fan = [(loop[0], loop[1], loop[2]), (loop[0], loop[2], loop[3])]
            else:
                fan = [(loop[1], loop[2], loop[3]), (loop[1], loop[3], loop[0])]
        else:
            center = len(self.points)
            self.points.append(self.project_center(loop, cell))
            fan = [(loop[i], loop[(i + 1) % count], center) for i in range(count)]
        self.triangles += fan
        self.parents += [cell] * len(fan)

    def project_center(self, loop: list[int], cell: int) -> tuple[float, float, float]:
        """
        Centroid of a contour loop moved onto the zero set of the cell's trilinear function by Newton steps.
        """
        lower = self.grid.cell_lower[cell]
        h = float(self.grid.cell_h[cell])
        corner_values = self.values[self.grid.cell_nodes[cell]]
        xi = (np.mean([self.points[i] for i in loop], axis=0) - lower) / h
        for _ in range(20):
            values, gradients = basis_arrays(xi, 1.0)
            f = float(values @ corner_values)
            if abs(f) <= NUDGE * self.scale:
                break
            g = corner_values @ gradients
            norm2 = float(g @ g)
            if norm2 == 0.0:
                break
            xi = np.clip(xi - f * g / norm2, 0.0, 1.0)
        return tuple(lower + h * xi)

    def build(self) -> SurfaceTriangulation:
        grid = self.grid
        vertices = np.array(self.points, dtype=float)
        triangles = np.array(self.triangles, dtype=np.int64)
        parents = np.array(self.parents, dtype=np.int64)
        corners = vertices[triangles]
        cross = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
        normals, doubled = unit_vectors(cross)

        barycenters = corners.mean(axis=1)
        xi = np.clip((barycenters - grid.cell_lower[parents]) / grid.cell_h[parents][:, None], 0.0, 1.0)
        _, gradients = basis_arrays(xi, grid.cell_h[parents])
        direction = np.einsum('na,nad->nd', self.values[grid.cell_nodes[parents]], gradients)
        flip = np.sum(normals * direction, axis=1) < 0.0
        triangles[flip] = triangles[flip][:, [0, 2, 1]]
        normals[flip] *= -1.0
        # Slivers of zero area take the normal of phi_h.
        degenerate = doubled <= 1e-300
        if np.any(degenerate):
            normals[degenerate] = unit_vectors(direction[degenerate])[0]
        logging.debug(f'Extracted {len(triangles)} triangles in {len(np.unique(parents))} cells')
        return SurfaceTriangulation(grid, vertices, triangles, parents, normals, 0.5 * doubled)
