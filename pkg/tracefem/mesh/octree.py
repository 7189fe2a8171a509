"""
This module contains the class OctreeGrid, a 2:1 balanced octree of cubic cells covering the bulk box,
and the operations that build, refine and balance it.

Cells are addressed by CellKey(level, i, j, k). Vertices live on the integer lattice of the finest admissible
level (level_cap), so that node identity across levels is an exact integer comparison.
"""
from collections import defaultdict
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np
import scipy.sparse

from tracefem.errors import MaxLevelExceeded, NonDivisibleResolution, EmptyBand
from tracefem.utils import logging

# Default maximum refinement depth below the base level.
DEFAULT_LEVEL_CAP = 12

# Corner a of a cell sits at offset (a & 1, (a >> 1) & 1, (a >> 2) & 1).
CORNER_OFFSETS = np.array([(a & 1, (a >> 1) & 1, (a >> 2) & 1) for a in range(8)], dtype=np.int64)

# Face and edge neighbours (corner neighbours do not take part in the balance condition).
NEIGHBOR_OFFSETS = [(di, dj, dk)
                    for dk in (-1, 0, 1) for dj in (-1, 0, 1) for di in (-1, 0, 1)
                    if 1 <= abs(di) + abs(dj) + abs(dk) <= 2]


def _cell_edges() -> list[tuple[np.ndarray, int]]:
    edges = []
    for axis in range(3):
        others = [d for d in range(3) if d != axis]
        for b in (0, 1):
            for c in (0, 1):
                start = np.zeros(3, dtype=np.int64)
                start[others[0]], start[others[1]] = b, c
                edges.append((start, axis))
    return edges


# The 12 cell edges as (start corner offset, axis).
EDGES = _cell_edges()


class CellKey(NamedTuple):
    level: int
    i: int
    j: int
    k: int

    @property
    def ijk(self) -> tuple[int, int, int]:
        return self.i, self.j, self.k

    @property
    def parent(self) -> 'CellKey':
        return CellKey(self.level - 1, self.i >> 1, self.j >> 1, self.k >> 1)

    def children(self) -> list['CellKey']:
        level, i, j, k = self.level + 1, 2 * self.i, 2 * self.j, 2 * self.k
        return [CellKey(level, i + dx, j + dy, k + dz) for dz in (0, 1) for dy in (0, 1) for dx in (0, 1)]


@dataclass
class HangingTable:
    """
    Constrained nodes of a grid. Row r constrains node nodes[r] to sum(weights[r, q] * value(masters[r, q]));
    unused master slots hold -1 with weight 0.
    """
    nodes: np.ndarray
    masters: np.ndarray
    weights: np.ndarray

    def __len__(self):
        return len(self.nodes)


class OctreeGrid:
    """
    Leaf cells of an octree over the cube [lower, upper]^3 with base^3 cells at level 0.
    Instances are immutable; refine and enforce_balance return new grids.
    """

    def __init__(self, lower: float, upper: float, base: int, leaves: Iterable[CellKey],
                 level_cap: int = DEFAULT_LEVEL_CAP):
        """
        Create a grid from its leaves.
        Args:
            lower: Lower corner coordinate of the bulk box (same in all directions).
            upper: Upper corner coordinate of the bulk box.
            base: Number of level-0 cells per direction.
            leaves: The leaf cells; they must tile the box.
            level_cap: The maximum admissible level.
        """
        self.lower = float(lower)
        self.upper = float(upper)
        self.base = int(base)
        self.level_cap = int(level_cap)
        self.leaves: list[CellKey] = sorted(CellKey(*key) for key in set(leaves))
        self.leaf_index: dict[CellKey, int] = {key: n for n, key in enumerate(self.leaves)}

    @property
    def side(self) -> float:
        return self.upper - self.lower

    @property
    def lattice_size(self) -> int:
        """
        Number of finest-level cells per direction.
        """
        return self.base << self.level_cap

    @property
    def fine_spacing(self) -> float:
        return self.side / self.lattice_size

    @property
    def max_level(self) -> int:
        return int(self.levels.max())

    def cell_size(self, level: int) -> float:
        return self.side / (self.base * 2 ** level)

    def __len__(self):
        return len(self.leaves)

    def __contains__(self, key) -> bool:
        return key in self.leaf_index

    def __eq__(self, other):
        if not isinstance(other, OctreeGrid):
            return NotImplemented
        return (self.lower, self.upper, self.base, self.leaves) == (other.lower, other.upper, other.base, other.leaves)

    def __str__(self):
        return f'OctreeGrid({len(self)} leaves, levels 0..{self.max_level}, box [{self.lower}, {self.upper}]^3)'

    # cell arrays

    @cached_property
    def levels(self) -> np.ndarray:
        return np.array([key.level for key in self.leaves], dtype=np.int64)

    @cached_property
    def ijk(self) -> np.ndarray:
        return np.array([key.ijk for key in self.leaves], dtype=np.int64).reshape(-1, 3)

    @cached_property
    def lattice_sizes(self) -> np.ndarray:
        """
        Side of every leaf in finest-lattice units.
        """
        return np.left_shift(np.int64(1), self.level_cap - self.levels)

    @cached_property
    def lattice_origins(self) -> np.ndarray:
        return self.ijk * self.lattice_sizes[:, None]

    @cached_property
    def cell_lower(self) -> np.ndarray:
        return self.lower + self.lattice_origins * self.fine_spacing

    @cached_property
    def cell_h(self) -> np.ndarray:
        return self.lattice_sizes * self.fine_spacing

    # vertex table

    def encode(self, lattice: np.ndarray) -> np.ndarray:
        """
        Encode finest-lattice points of shape (..., 3) as integer node keys.
        """
        m = np.int64(self.lattice_size + 1)
        lattice = np.asarray(lattice, dtype=np.int64)
        return lattice[..., 0] + m * (lattice[..., 1] + m * lattice[..., 2])

    def decode(self, keys: np.ndarray) -> np.ndarray:
        m = np.int64(self.lattice_size + 1)
        keys = np.asarray(keys, dtype=np.int64)
        return np.stack([keys % m, (keys // m) % m, keys // (m * m)], axis=-1)

    @cached_property
    def corner_keys(self) -> np.ndarray:
        lattice = self.lattice_origins[:, None, :] + CORNER_OFFSETS[None, :, :] * self.lattice_sizes[:, None, None]
        return self.encode(lattice)

    @cached_property
    def node_keys(self) -> np.ndarray:
        """
        Sorted keys of all grid vertices; the node id of a vertex is its position in this array.
        """
        return np.unique(self.corner_keys)

    @cached_property
    def cell_nodes(self) -> np.ndarray:
        """
        Node ids of the 8 corners of every leaf, shape (n, 8).
        """
        return np.searchsorted(self.node_keys, self.corner_keys)

    @cached_property
    def node_points(self) -> np.ndarray:
        return self.lower + self.decode(self.node_keys) * self.fine_spacing

    @property
    def vertex_count(self) -> int:
        return len(self.node_keys)

    def node_ids(self, keys: np.ndarray) -> np.ndarray:
        """
        Node ids of existing vertex keys, -1 for keys that are not vertices.
        """
        keys = np.asarray(keys, dtype=np.int64)
        position = np.searchsorted(self.node_keys, keys)
        position = np.minimum(position, len(self.node_keys) - 1)
        return np.where(self.node_keys[position] == keys, position, -1)

    # hanging nodes

    @cached_property
    def hanging(self) -> HangingTable:
        """
        Vertices lying inside an edge (weights 1/2) or a face (weights 1/4) of some leaf.
        """
        split = self.lattice_sizes > 1
        origins = self.lattice_origins[split]
        sizes = self.lattice_sizes[split][:, None]
        half = sizes // 2
        found_nodes, found_masters, found_weights = [], [], []

        for start, axis in EDGES:
            direction = np.zeros(3, dtype=np.int64)
            direction[axis] = 1
            first = origins + start * sizes
            ids = self.node_ids(self.encode(first + direction * half))
            hit = ids >= 0
            if not np.any(hit):
                continue
            a = self.node_ids(self.encode(first[hit]))
            b = self.node_ids(self.encode(first[hit] + direction * sizes[hit]))
            found_nodes.append(ids[hit])
            found_masters.append(np.stack([a, b, -np.ones_like(a), -np.ones_like(a)], axis=1))
            found_weights.append(np.tile([0.5, 0.5, 0.0, 0.0], (len(a), 1)))

        for axis in range(3):
            others = [d for d in range(3) if d != axis]
            for side in (0, 1):
                shift = np.zeros(3, dtype=np.int64)
                shift[axis] = side
                center = origins + shift * sizes
                center[:, others[0]] += half[:, 0]
                center[:, others[1]] += half[:, 0]
                ids = self.node_ids(self.encode(center))
                hit = ids >= 0
                if not np.any(hit):
                    continue
                corners = []
                for b in (0, 1):
                    for c in (0, 1):
                        offset = shift.copy()
                        offset[others[0]], offset[others[1]] = b, c
                        corners.append(self.node_ids(self.encode(origins[hit] + offset * sizes[hit])))
                found_nodes.append(ids[hit])
                found_masters.append(np.stack(corners, axis=1))
                found_weights.append(np.full((hit.sum(), 4), 0.25))

        if not found_nodes:
            empty = np.zeros(0, dtype=np.int64)
            return HangingTable(empty, np.zeros((0, 4), dtype=np.int64), np.zeros((0, 4)))
        nodes = np.concatenate(found_nodes)
        unique, first = np.unique(nodes, return_index=True)
        return HangingTable(unique, np.concatenate(found_masters)[first], np.concatenate(found_weights)[first])

    @property
    def hanging_count(self) -> int:
        return len(self.hanging)

    @cached_property
    def free_mask(self) -> np.ndarray:
        mask = np.ones(self.vertex_count, dtype=bool)
        mask[self.hanging.nodes] = False
        return mask

    @cached_property
    def constraint(self) -> scipy.sparse.csr_matrix:
        """
        Square node-to-node matrix R with R[i, j] the weight of free node j in the value of node i.
        Free rows are unit rows; constraint chains are resolved until only free columns remain.
        """
        n = self.vertex_count
        table = self.hanging
        free = np.flatnonzero(self.free_mask)
        used = table.masters >= 0
        rows = np.concatenate([free, np.repeat(table.nodes, used.sum(axis=1))])
        cols = np.concatenate([free, table.masters[used]])
        data = np.concatenate([np.ones(len(free)), table.weights[used]])
        step = scipy.sparse.csr_matrix((data, (rows, cols)), shape=(n, n))
        resolved = step
        for _ in range(self.level_cap + 1):
            if len(table) == 0 or resolved[:, table.nodes].nnz == 0:
                break
            resolved = (resolved @ step).tocsr()
        resolved.eliminate_zeros()
        return resolved

    def locate(self, points: np.ndarray) -> np.ndarray:
        """
        Index of the leaf containing each point (points on shared faces go to the upper neighbour).
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        lattice = np.floor((points - self.lower) / self.fine_spacing).astype(np.int64)
        lattice = np.clip(lattice, 0, self.lattice_size - 1)
        found = np.full(len(points), -1, dtype=np.int64)
        for level in sorted(set(self.levels.tolist())):
            pending = np.flatnonzero(found < 0)
            if len(pending) == 0:
                break
            cells = lattice[pending] >> (self.level_cap - level)
            for n, cell in zip(pending, cells.tolist()):
                found[n] = self.leaf_index.get((level, *cell), -1)
        return found


def build_uniform(box: tuple[float, float], h0: float, level_cap: int = DEFAULT_LEVEL_CAP) -> OctreeGrid:
    """
    Build the uniform grid of cubes with side h0 over box^3.
    Args:
        box: The (lower, upper) coordinates of the bulk cube.
        h0: The cell size; it must divide the box side.
        level_cap: The maximum refinement depth.
    returns:
        The uniform grid, all leaves at level 0.
    """
    lower, upper = float(box[0]), float(box[1])
    count = (upper - lower) / h0
    if h0 <= 0.0 or count < 1.0 - 1e-9 or abs(count - round(count)) > 1e-9:
        raise NonDivisibleResolution(f'Cell size does not divide the box side : "{h0}"')
    base = int(round(count))
    leaves = [CellKey(0, i, j, k) for k in range(base) for j in range(base) for i in range(base)]
    return OctreeGrid(lower, upper, base, leaves, level_cap)


def refine(grid: OctreeGrid, marked: Iterable[CellKey]) -> OctreeGrid:
    """
    Replace the marked leaves by their 8 children and restore the 2:1 balance.
    Args:
        grid: The grid to refine.
        marked: Leaves to refine; keys that are not leaves are ignored.
    returns:
        The refined balanced grid, or grid itself when nothing was marked.
    """
    leaves = set(grid.leaves)
    ignored = 0
    changed = False
    for key in set(marked):
        key = CellKey(*key)
        if key not in leaves:
            ignored += 1
            continue
        leaves.remove(key)
        leaves.update(key.children())
        changed = True
    if ignored:
        logging.warning(f'Ignored {ignored} refinement marks that are not leaves')
    if not changed:
        return grid
    return enforce_balance(OctreeGrid(grid.lower, grid.upper, grid.base, leaves, grid.level_cap))


def enforce_balance(grid: OctreeGrid) -> OctreeGrid:
    """
    Split leaves until any two face- or edge-adjacent leaves differ by at most one level.
    Leaves are processed from the finest level down; a split only creates coarser leaves than the level being
    processed, so one sweep reaches the fixed point.
    Args:
        grid: Any grid.
    returns:
        The balanced grid, or grid itself when it is already balanced.
    """
    if grid.max_level > grid.level_cap:
        raise MaxLevelExceeded(grid.level_cap)
    leaves = set(grid.leaves)
    tree = set(leaves)
    by_level: dict[int, set[CellKey]] = defaultdict(set)
    for key in leaves:
        by_level[key.level].add(key)
        ancestor = key
        while ancestor.level > 0:
            ancestor = ancestor.parent
            if ancestor in tree:
                break
            tree.add(ancestor)

    def split(key: CellKey):
        leaves.remove(key)
        by_level[key.level].discard(key)
        for child in key.children():
            leaves.add(child)
            tree.add(child)
            by_level[child.level].add(child)

    changed = False
    for level in range(grid.max_level, 1, -1):
        count = grid.base << level
        for _, i, j, k in sorted(by_level[level]):
            for di, dj, dk in NEIGHBOR_OFFSETS:
                ni, nj, nk = i + di, j + dj, k + dk
                if not (0 <= ni < count and 0 <= nj < count and 0 <= nk < count):
                    continue
                if (level - 1, ni >> 1, nj >> 1, nk >> 1) in tree:
                    continue
                depth = level - 2
                while (depth, ni >> (level - depth), nj >> (level - depth), nk >> (level - depth)) not in leaves:
                    depth -= 1
                while depth < level - 1:
                    shift = level - depth
                    split(CellKey(depth, ni >> shift, nj >> shift, nk >> shift))
                    depth += 1
                changed = True
    if not changed:
        return grid
    return OctreeGrid(grid.lower, grid.upper, grid.base, leaves, grid.level_cap)


def surface_band(grid: OctreeGrid, ls, field=None) -> set[CellKey]:
    """
    Leaves on which the trilinear interpolant of the level set changes sign or vanishes at a corner.
    Args:
        grid: The grid.
        ls: The level set (ignored when field is given).
        field: Optional precomputed TrilinearField of the level set.
    returns:
        The set of band cells.
    """
    from tracefem.mesh.trilinear import interpolate_levelset
    if field is None:
        field = interpolate_levelset(grid, ls)
    corners = field.values[grid.cell_nodes]
    low, high = corners.min(axis=1), corners.max(axis=1)
    cut = (low <= 0.0) & (high >= 0.0)
    if not np.any(cut):
        raise EmptyBand(f'The surface does not cut the grid : "{grid}"')
    return {grid.leaves[n] for n in np.flatnonzero(cut)}


def refine_band(grid: OctreeGrid, ls, field=None) -> OctreeGrid:
    """
    Refine every cell of the surface band once (uniform refinement towards the surface).
    """
    return refine(grid, surface_band(grid, ls, field))


def pairwise_contacts(grid: OctreeGrid, chunk: int = 256):
    """
    Enumerate pairs of distinct leaves whose closed boxes intersect.
    Args:
        grid: The grid.
        chunk: Rows compared per vectorized block.
    returns:
        An iterator of (i, j, overlapping axes) with i < j, where overlapping axes counts the directions
        with an overlap of positive length (3 means the cells overlap in volume).
    """
    lo = grid.lattice_origins
    hi = lo + grid.lattice_sizes[:, None]
    n = len(grid)
    for start in range(0, n, chunk):
        stop = min(start + chunk, n)
        low = np.maximum(lo[start:stop, None, :], lo[None, :, :])
        high = np.minimum(hi[start:stop, None, :], hi[None, :, :])
        touching = np.all(high >= low, axis=2)
        overlap = np.sum(high > low, axis=2)
        rows, cols = np.nonzero(touching)
        for r, c in zip(rows.tolist(), cols.tolist()):
            i = start + r
            if c > i:
                yield i, c, int(overlap[r, c])


def audit_balance(grid: OctreeGrid) -> list[tuple[CellKey, CellKey]]:
    """
    Exhaustive 2:1 audit: face- or edge-adjacent leaf pairs whose levels differ by more than one.
    """
    violations = []
    for i, j, overlap in pairwise_contacts(grid):
        if overlap >= 1 and abs(int(grid.levels[i]) - int(grid.levels[j])) > 1:
            violations.append((grid.leaves[i], grid.leaves[j]))
    return violations


def audit_tiling(grid: OctreeGrid) -> tuple[float, int]:
    """
    Total leaf volume and the number of leaf pairs overlapping in volume.
    """
    volume = float(np.sum(grid.cell_h ** 3))
    overlaps = sum(1 for _, _, overlap in pairwise_contacts(grid) if overlap == 3)
    return volume, overlaps
