"""
This module contains the abstract class SurfaceProblem that is the base class for all surface problems
-eps Lap_G u + w . grad_G u + (c + div_G w) u = f, and the discovery of the builtin problems.
"""
import importlib
import inspect
import os
from dataclasses import dataclass
from functools import lru_cache
from typing import Iterator

import numpy as np

from tracefem.errors import MissingExactSolution, UnknownProblemId
from tracefem.geometry.differential import closest_point_project
from tracefem.geometry.level_set import LevelSetField
from tracefem.utils import as_points, restore, projectors, unit_vectors

# Directory holding one module per builtin problem.
problems_directory = os.path.join(os.path.dirname(__file__), 'problems')


@dataclass
class ProblemData:
    """
    Problem data evaluated at an array of points after projection onto the surface.
    """
    projected: np.ndarray
    velocity: np.ndarray | None
    reaction: np.ndarray
    rhs: np.ndarray


class SurfaceProblem:
    """
    Abstract class for all surface problems. Subclasses define the data on surface points through the
    *_on_surface methods; the public data maps compose them with the closest-point projection so that every
    datum is constant along normals inside the band.
    """

    # The identifier used in config files (problem = "ex1").
    problem_id: str = ''
    # Human readable description.
    description: str = ''
    # Default bulk box (lower, upper) of the cube containing the surface.
    box: tuple[float, float] = (-2.0, 2.0)
    # Diffusion coefficient.
    eps: float = 1.0
    # True for the pure Laplace-Beltrami problem (w = 0, c = 0) closed by a zero-mean condition.
    zero_mean_mode: bool = False
    # True when the problem has a nonzero velocity field.
    has_velocity: bool = False
    # True when an exact solution is known.
    has_exact_solution: bool = True
    # The implicit surface.
    level_set: LevelSetField

    # Finite-difference step for derived quantities (velocity Jacobian, surface gradient fallback).
    difference_step: float = 1e-6

    def __init__(self, **params):
        """
        Create a problem. Unknown parameters are ignored so that a common parameter set can be passed to any problem;
        eps overrides the diffusion coefficient.
        """
        self.params = params
        if params.get('eps') is not None:
            self.eps = float(params['eps'])

    def project(self, x) -> np.ndarray:
        return closest_point_project(self.level_set, x)

    def velocity(self, x) -> np.ndarray:
        points, leading = as_points(x)
        return restore(self._velocity_on_surface(self.project(points)), leading)

    def reaction(self, x) -> np.ndarray:
        points, leading = as_points(x)
        return restore(self._reaction_on_surface(self.project(points)), leading)

    def rhs(self, x) -> np.ndarray:
        points, leading = as_points(x)
        return restore(self._rhs_on_surface(self.project(points)), leading)

    def exact_solution(self, x) -> np.ndarray:
        if not self.has_exact_solution:
            raise MissingExactSolution(f'Problem has no exact solution : "{self.problem_id}"')
        points, leading = as_points(x)
        return restore(self._solution_on_surface(self.project(points)), leading)

    def exact_surface_gradient(self, x) -> np.ndarray:
        """
        Surface gradient of the exact solution at the projections of x.
        Falls back to central differences of u o p when no analytic gradient is provided.
        """
        if not self.has_exact_solution:
            raise MissingExactSolution(f'Problem has no exact solution : "{self.problem_id}"')
        points, leading = as_points(x)
        projected = self.project(points)
        gradient = self._surface_gradient_on_surface(projected)
        if gradient is None:
            gradient = np.empty_like(projected)
            for axis in range(3):
                offset = np.zeros(3)
                offset[axis] = self.difference_step
                forward = self._solution_on_surface(self.project(projected + offset))
                backward = self._solution_on_surface(self.project(projected - offset))
                gradient[:, axis] = (forward - backward) / (2.0 * self.difference_step)
        normal, _ = unit_vectors(self.level_set.gradient(projected))
        gradient = np.einsum('nij,nj->ni', projectors(normal), gradient)
        return restore(gradient, leading)

    def velocity_jacobian(self, x) -> np.ndarray:
        """
        Jacobian J[i, j] = d w_i / d x_j of the normal extension of the velocity.
        When the problem gives the ambient Jacobian of its velocity formula and the level set is a distance field,
        J is that Jacobian at p(x) times the Jacobian of the closest-point map; otherwise central differences.
        """
        points, leading = as_points(x)
        if not self.has_velocity:
            return restore(np.zeros((points.shape[0], 3, 3)), leading)
        if self.level_set.is_distance:
            formula = self._velocity_jacobian_on_surface(self.project(points))
            if formula is not None:
                # Dp = I - n n^T - d Hess(d) for the signed distance d
                distance = self.level_set.evaluate(points)
                normal = self.level_set.gradient(points)
                closest = np.eye(3) - normal[:, :, None] * normal[:, None, :] \
                    - distance[:, None, None] * self.level_set.hessian(points)
                return restore(np.einsum('nik,nkj->nij', formula, closest), leading)
        return restore(self.velocity_jacobian_by_differences(points), leading)

    def velocity_jacobian_by_differences(self, x) -> np.ndarray:
        """
        Central-difference Jacobian of the normal extension of the velocity.
        """
        points, leading = as_points(x)
        jacobian = np.zeros((points.shape[0], 3, 3))
        if not self.has_velocity:
            return restore(jacobian, leading)
        for axis in range(3):
            offset = np.zeros(3)
            offset[axis] = self.difference_step
            jacobian[:, :, axis] = (self.velocity(points + offset) - self.velocity(points - offset)) \
                / (2.0 * self.difference_step)
        return restore(jacobian, leading)

    def surface_data(self, x: np.ndarray) -> ProblemData:
        """
        Evaluate velocity, reaction and rhs with a single projection.
        Args:
            x: The (n, 3) points.
        returns:
            The ProblemData of the points.
        """
        projected = self.project(x)
        velocity = self._velocity_on_surface(projected) if self.has_velocity else None
        return ProblemData(projected=projected,
                           velocity=velocity,
                           reaction=self._reaction_on_surface(projected),
                           rhs=self._rhs_on_surface(projected))

    def _velocity_on_surface(self, p: np.ndarray) -> np.ndarray:
        return np.zeros_like(p)

    def _reaction_on_surface(self, p: np.ndarray) -> np.ndarray:
        return np.ones(p.shape[0])

    def _rhs_on_surface(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _solution_on_surface(self, p: np.ndarray) -> np.ndarray:
        raise MissingExactSolution(f'Problem has no exact solution : "{self.problem_id}"')

    def _surface_gradient_on_surface(self, p: np.ndarray) -> np.ndarray | None:
        return None

    def _velocity_jacobian_on_surface(self, p: np.ndarray) -> np.ndarray | None:
        # Ambient Jacobian of the velocity formula at surface points; None selects finite differences.
        return None

    def __str__(self):
        return f'{self.problem_id} ({self.description})'


def get_builtin_problems() -> Iterator[type[SurfaceProblem]]:
    """
    Get all the problem classes defined in the problems directory.
    returns:
        An iterator of classes that are builtin problems (subclasses of SurfaceProblem).
    """
    module_files = sorted(f for f in os.listdir(problems_directory) if f.endswith('.py'))
    # Remove the file extension to get module names.
    module_names = [os.path.splitext(f)[0] for f in module_files]
    for module_name in module_names:
        module = importlib.import_module(f'tracefem.geometry.problems.{module_name}')
        for _, cls in inspect.getmembers(module, inspect.isclass):
            if issubclass(cls, SurfaceProblem) and cls is not SurfaceProblem and cls.__module__ == module.__name__:
                yield cls


@lru_cache(maxsize=None)
def _problem_classes() -> dict[str, type[SurfaceProblem]]:
    return {cls.problem_id: cls for cls in get_builtin_problems() if cls.problem_id}


def builtin_problem(problem_id: str, **params) -> SurfaceProblem:
    """
    Create a builtin problem from its identifier.
    Args:
        problem_id: The identifier (ex1 .. ex6, patch), case insensitive.
        params: Problem parameters (eps, lam, alternate_spot, surface).
    returns:
        The problem instance.
    """
    classes = _problem_classes()
    key = problem_id.strip().lower()
    if key not in classes:
        raise UnknownProblemId(f'Unknown problem id : "{problem_id}" (known: {", ".join(sorted(classes))})')
    return classes[key](**params)
