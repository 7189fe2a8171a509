"""
This module contains the layer-fitted (Shishkin type) octree grids: fine cells in the strip |x_3| <= b around an
interior layer, coarse cells elsewhere, with a balanced transition in between.
"""
import math

import numpy as np

from tracefem.errors import NonDivisibleResolution, InvalidStrip
from tracefem.mesh.octree import OctreeGrid, build_uniform, refine, refine_band, surface_band, DEFAULT_LEVEL_CAP
from tracefem.utils import logging


def build_shishkin_grid(box: tuple[float, float], band_halfwidth: float, h_min: float, h_max: float, ls=None,
                        level_cap: int = DEFAULT_LEVEL_CAP) -> OctreeGrid:
    """
    Build a grid with cells of size h_min wherever they meet the strip |x_3| < band_halfwidth.
    Args:
        box: The bulk box.
        band_halfwidth: Half width b of the strip.
        h_min: Cell size inside the strip.
        h_max: Cell size of the base grid.
        ls: Optional level set; when given only cells of its band are refined.
        level_cap: Maximum refinement depth.
    returns:
        The balanced grid.
    """
    ratio = h_max / h_min
    depth = round(math.log2(ratio)) if ratio >= 1.0 else -1
    if depth < 0 or abs(ratio - 2 ** depth) > 1e-9 * ratio:
        raise NonDivisibleResolution(f'h_max / h_min is not a power of two : "{ratio}"')
    if band_halfwidth < h_min:
        raise InvalidStrip(f'Strip half width is below h_min : "{band_halfwidth}"')
    grid = build_uniform(box, h_max, level_cap)
    limit = h_min * (1.0 + 1e-9)
    for _ in range(depth):
        lower = grid.cell_lower[:, 2]
        upper = lower + grid.cell_h
        candidate = (grid.cell_h > limit) & (lower < band_halfwidth) & (upper > -band_halfwidth)
        if ls is not None:
            band = surface_band(grid, ls)
            candidate &= np.array([key in band for key in grid.leaves])
        marked = [grid.leaves[n] for n in np.flatnonzero(candidate)]
        if not marked:
            break
        grid = refine(grid, marked)
    logging.info(f'Shishkin grid: {len(grid)} leaves, h in [{grid.cell_h.min():g}, {grid.cell_h.max():g}]')
    return grid


def shishkin_sequence(grid: OctreeGrid, ls, refinements: int) -> list[OctreeGrid]:
    """
    The base grid followed by its uniform band refinements.
    """
    grids = [grid]
    for _ in range(refinements):
        grids.append(refine_band(grids[-1], ls))
    return grids
