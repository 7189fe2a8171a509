import numpy as np
import pytest

import config
from tracefem.fem.dofs import build_dof_map
from tracefem.geometry.problem import builtin_problem
from tracefem.mesh.marching import extract_surface
from tracefem.mesh.octree import build_uniform, refine_band
from tracefem.mesh.trilinear import interpolate_levelset
from tracefem.pipeline import SolverSettings, solve_on_grid


@pytest.fixture(autouse=True)
def default_config(monkeypatch):
    monkeypatch.setitem(config.DEFAULTS, 'threads', 1)
    config.reset()
    config.set_output_directory(config.values['output.directory'])
    yield
    config.reset()
    config.set_output_directory(config.values['output.directory'])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope='session')
def sphere_problem():
    return builtin_problem('ex1')


@pytest.fixture(scope='session')
def patch_problem():
    return builtin_problem('patch', surface='sphere')


@pytest.fixture(scope='session')
def sphere_grid(sphere_problem):
    return build_uniform(sphere_problem.box, 0.5)


@pytest.fixture(scope='session')
def refined_sphere_grid(sphere_problem, sphere_grid):
    """
    The coarse sphere grid refined once around the surface, with hanging nodes.
    """
    return refine_band(sphere_grid, sphere_problem.level_set)


@pytest.fixture(scope='session')
def sphere_surface(sphere_problem, refined_sphere_grid):
    field = interpolate_levelset(refined_sphere_grid, sphere_problem.level_set)
    tri = extract_surface(refined_sphere_grid, field)
    return field, tri, build_dof_map(refined_sphere_grid, tri)


@pytest.fixture(scope='session')
def patch_solution(patch_problem, refined_sphere_grid):
    return solve_on_grid(patch_problem, refined_sphere_grid, SolverSettings())
