"""
This module contains the adaptive loop solve -> estimate -> mark -> refine -> re-extract.
"""
import math
from dataclasses import dataclass, field
from typing import Iterator

from tracefem.adapt.estimator import CellIndicator, combine_and_weight, estimate, mark_maximum
from tracefem.analysis.norms import ErrorReport, error_norms
from tracefem.fem.quadrature import triangle_rule
from tracefem.geometry.problem import SurfaceProblem
from tracefem.mesh.octree import OctreeGrid, refine, DEFAULT_LEVEL_CAP
from tracefem.pipeline import Discretization, SolverSettings, initial_grid, solve_on_grid
from tracefem.utils import logging


@dataclass
class AdaptControls:
    steps: int = 12
    max_dofs: int = 200000
    mode: str = 'elliptic'
    alpha_g: float = 0.0
    conormal: bool = True
    h0: float = 0.25
    levels: int = 0
    level_cap: int = DEFAULT_LEVEL_CAP
    settings: SolverSettings = field(default_factory=SolverSettings)

    @classmethod
    def from_config(cls, values: dict) -> 'AdaptControls':
        return cls(steps=values['adapt.steps'],
                   max_dofs=values['adapt.max_dofs'],
                   mode=values['adapt.mode'],
                   alpha_g=values['adapt.alpha_g'],
                   conormal=values['adapt.conormal'],
                   h0=values['mesh.h0'],
                   levels=values['mesh.levels'],
                   level_cap=values['mesh.level_cap'],
                   settings=SolverSettings.from_config(values))


@dataclass(eq=False)
class AdaptStep:
    step: int
    result: Discretization
    report: ErrorReport | None
    indicators: list[CellIndicator]
    marked: set

    @property
    def dofs(self) -> int:
        return len(self.result.dofs)

    @property
    def eta(self) -> float:
        return math.sqrt(sum(indicator.eta ** 2 for indicator in self.indicators))

    def as_row(self) -> dict:
        row = {'step': self.step, 'dofs': self.dofs, 'leaves': len(self.result.grid),
               'triangles': len(self.result.tri)}
        if self.report is not None:
            row.update(l2=self.report.l2, h1=self.report.h1, linf=self.report.linf)
        row.update(eta=self.eta, marked=len(self.marked))
        return row


def adapt_loop(problem: SurfaceProblem, controls: AdaptControls, grid: OctreeGrid | None = None,
               box: tuple[float, float] | None = None) -> Iterator[AdaptStep]:
    """
    Run the adaptive loop.
    Args:
        problem: The surface problem.
        controls: Step and dof budgets, estimator mode and solver settings.
        grid: Initial grid; built from controls.h0 and controls.levels when None.
        box: Bulk box of the initial grid (problem box by default).
    returns:
        An iterator of AdaptStep, one per solve. The last step marks nothing. The loop ends after controls.steps
        refinements, once the dof budget is reached, or when every marked cell is at the level cap.
    """
    if grid is None:
        grid = initial_grid(problem, controls.h0, controls.levels, controls.level_cap, box)
    rule = triangle_rule(controls.settings.degree)
    for step in range(controls.steps + 1):
        result = solve_on_grid(problem, grid, controls.settings)
        report = None
        if problem.has_exact_solution:
            report = error_norms(result.u, problem, result.tri, result.dofs, rule)
        parts = estimate(result.tri, result.u, problem, result.dofs, rule, controls.conormal)
        indicators = combine_and_weight(parts, grid, problem.eps, controls.mode, controls.alpha_g)
        last = step == controls.steps or len(result.dofs) >= controls.max_dofs
        marked = set()
        if not last:
            candidates = mark_maximum(indicators)
            marked = {key for key in candidates if key.level < grid.level_cap}
            if len(marked) < len(candidates):
                logging.warning(f'Dropped {len(candidates) - len(marked)} marked cells at the level cap '
                                f'"{grid.level_cap}"')
            if not marked:
                logging.warning(f'Adaptive loop stops at step {step}: every marked cell is at the level cap')
                last = True
        logging.info(f'Adaptive step {step}: {len(result.dofs)} dofs, {len(marked)} marked cells')
        yield AdaptStep(step, result, report, indicators, marked)
        if last:
            return
        grid = refine(grid, marked)
