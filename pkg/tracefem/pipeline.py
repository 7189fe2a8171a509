"""
This module contains the discretization pipeline shared by the commands: grid -> phi_h -> Gamma_h -> dofs ->
system -> solution.
"""
import time
from dataclasses import dataclass, field

import numpy as np

from tracefem.fem.assembly import TraceSystem, assemble, DELTA0, DELTA1
from tracefem.fem.dofs import DofMap, build_dof_map
from tracefem.fem.quadrature import triangle_rule
from tracefem.geometry.problem import SurfaceProblem
from tracefem.mesh.marching import SurfaceTriangulation, extract_surface
from tracefem.mesh.octree import OctreeGrid, build_uniform, refine_band, DEFAULT_LEVEL_CAP
from tracefem.mesh.trilinear import TrilinearField, interpolate_levelset
from tracefem.solver.linear import LinearSolveReport, solve
from tracefem.utils import logging


@dataclass
class SolverSettings:
    variant: str = 'surface_gradient'
    degree: int = 4
    delta0: float = DELTA0
    delta1: float = DELTA1
    method: str = 'auto'
    tol: float = 1e-10
    threads: int = 1

    @classmethod
    def from_config(cls, values: dict, variant: str | None = None) -> 'SolverSettings':
        return cls(variant=variant or values['variant'],
                   degree=values['quadrature.degree'],
                   delta0=values['supg.delta0'],
                   delta1=values['supg.delta1'],
                   method=values['solver.method'],
                   tol=values['solver.tol'],
                   threads=values['threads'])


@dataclass(eq=False)
class Discretization:
    """
    Everything computed for one solve on one grid.
    """
    problem: SurfaceProblem
    grid: OctreeGrid
    field: TrilinearField
    tri: SurfaceTriangulation
    dofs: DofMap
    system: TraceSystem
    u: np.ndarray
    report: LinearSolveReport
    timings: dict[str, float] = field(default_factory=dict)

    def vertex_values(self) -> np.ndarray:
        """
        u_h at the vertices of Gamma_h.
        """
        tri = self.tri
        cells = np.zeros(len(tri.vertices), dtype=np.int64)
        cells[tri.triangles.ravel()] = np.repeat(tri.parents, 3)
        return TrilinearField(self.grid, self.dofs.nodal(self.u)).evaluate(tri.vertices, cells)


def initial_grid(problem: SurfaceProblem, h0: float, levels: int = 0, level_cap: int = DEFAULT_LEVEL_CAP,
                 box: tuple[float, float] | None = None) -> OctreeGrid:
    """
    Uniform grid of size h0 over the problem box, refined levels times around the surface.
    """
    grid = build_uniform(box or problem.box, h0, level_cap)
    for _ in range(levels):
        grid = refine_band(grid, problem.level_set)
    return grid


def solve_on_grid(problem: SurfaceProblem, grid: OctreeGrid, settings: SolverSettings | None = None) \
        -> Discretization:
    """
    Extract Gamma_h on a grid, assemble and solve.
    Args:
        problem: The surface problem.
        grid: The grid.
        settings: Variant, quadrature, SUPG and solver settings.
    returns:
        The Discretization.
    """
    settings = settings or SolverSettings()
    timings = {}
    start = time.perf_counter()
    field = interpolate_levelset(grid, problem.level_set)
    tri = extract_surface(grid, field)
    dofs = build_dof_map(grid, tri)
    timings['extract'] = time.perf_counter() - start

    start = time.perf_counter()
    system = assemble(problem, grid, tri, dofs, settings.variant, triangle_rule(settings.degree),
                      settings.delta0, settings.delta1, settings.threads)
    timings['assemble'] = time.perf_counter() - start

    start = time.perf_counter()
    u, report = solve(system, settings.tol, settings.method)
    timings['solve'] = time.perf_counter() - start
    logging.info(f'Solved {problem.problem_id} ({settings.variant}) on {len(grid)} leaves: {len(dofs)} dofs, '
                 f'{len(tri)} triangles')
    return Discretization(problem, grid, field, tri, dofs, system, u, report, timings)
