import numpy as np
import pytest

from tracefem.errors import ConfigError, UnknownProblemId, MissingExactSolution
from tracefem.geometry.differential import closest_point_project, normal_hessian
from tracefem.geometry.level_set import Sphere, Torus, WavyCigar, SixHandleSurface, ExpressionField
from tracefem.geometry.problem import builtin_problem, get_builtin_problems


def test_sphere_distance_and_projection():
    sphere = Sphere(1.0)
    assert sphere.evaluate([2.0, 0.0, 0.0]) == pytest.approx(1.0)
    points = np.array([[0.0, 0.0, 1.5], [0.3, -0.4, 0.0]])
    projected = closest_point_project(sphere, points)
    np.testing.assert_allclose(np.linalg.norm(projected, axis=1), 1.0)
    np.testing.assert_allclose(projected[0], [0.0, 0.0, 1.0])


def test_torus_projection_lands_on_surface():
    torus = Torus(1.0, 0.6)
    projected = closest_point_project(torus, [[1.9, 0.0, 0.1], [0.0, 1.2, -0.3]])
    np.testing.assert_allclose(torus.evaluate(projected), 0.0, atol=1e-12)


def test_newton_projection_of_non_distance_field():
    cigar = WavyCigar()
    projected = closest_point_project(cigar, [0.0, 1.05, 0.0])
    np.testing.assert_allclose(projected, [0.0, 1.0, 0.0], atol=1e-10)


def test_general_projection_offset_is_normal():
    cigar = WavyCigar()
    start = np.array([[1.2, 0.5, 0.2], [-1.0, -0.75, 0.1]])
    projected = closest_point_project(cigar, start)
    assert np.all(np.abs(cigar.evaluate(projected)) < 1e-10)
    normal = cigar.gradient(projected)
    normal /= np.linalg.norm(normal, axis=1)[:, None]
    offset = start - projected
    tangential = offset - np.sum(offset * normal, axis=1)[:, None] * normal
    assert np.all(np.linalg.norm(tangential, axis=1) < 1e-8)


def test_sphere_curvature_trace():
    data = normal_hessian(Sphere(1.0), [[0.0, 1.0, 0.0], [0.6, 0.0, 0.8]])
    np.testing.assert_allclose(data.mean_curvature_trace, 2.0)
    np.testing.assert_allclose(np.einsum('nij,nj->ni', data.projector, data.unit_normal), 0.0, atol=1e-15)


def _central_gradient(field, x, step=1e-6):
    gradient = np.empty_like(x)
    for axis in range(3):
        offset = np.zeros(3)
        offset[axis] = step
        gradient[:, axis] = (field.evaluate(x + offset) - field.evaluate(x - offset)) / (2.0 * step)
    return gradient


def test_analytic_gradients_match_finite_differences():
    x = np.array([[0.7, -1.1, 0.4], [1.3, 0.2, -0.9]])
    for field in (WavyCigar(), SixHandleSurface(), Torus(1.0, 0.6)):
        np.testing.assert_allclose(field.gradient(x), _central_gradient(field, x), rtol=1e-5, atol=1e-6)


def test_expression_field():
    field = ExpressionField('x1**2 + x2**2 + x3**2 - 1')
    assert field.evaluate([1.0, 1.0, 1.0]) == pytest.approx(2.0)
    np.testing.assert_allclose(field.gradient([1.0, 0.0, 0.0]), [2.0, 0.0, 0.0], atol=1e-6)


def test_builtin_problems_are_discovered():
    ids = {cls.problem_id for cls in get_builtin_problems()}
    assert ids == {'ex1', 'ex2', 'ex3', 'ex4', 'ex5', 'ex6', 'patch'}


def test_builtin_problem_lookup():
    assert builtin_problem('EX1').problem_id == 'ex1'
    with pytest.raises(UnknownProblemId):
        builtin_problem('ex9')
    with pytest.raises(ConfigError):
        builtin_problem('ex6', eps=10.0)
    assert builtin_problem('ex6').eps == pytest.approx(1e-4)
    assert builtin_problem('ex6', eps=1e-3).eps == pytest.approx(1e-3)


def test_problem_data_is_constant_along_normals(sphere_problem):
    x = np.array([[0.3, 0.5, -0.7], [-0.2, 0.9, 0.1]])
    x /= np.linalg.norm(x, axis=1)[:, None]
    for scale in (0.8, 1.2):
        np.testing.assert_allclose(sphere_problem.rhs(scale * x), sphere_problem.rhs(x))
        np.testing.assert_allclose(sphere_problem.exact_solution(scale * x), sphere_problem.exact_solution(x))


def test_exact_surface_gradient_is_tangential():
    for problem_id in ('ex1', 'ex2', 'ex6'):
        problem = builtin_problem(problem_id)
        x = np.array([[0.9, 0.3, 0.4], [0.1, -1.3, 0.35]])
        projected = problem.project(x)
        normal = problem.level_set.gradient(projected)
        gradient = problem.exact_surface_gradient(x)
        np.testing.assert_allclose(np.sum(normal * gradient, axis=1), 0.0, atol=1e-8)


def test_velocity_of_interior_layer_is_tangential():
    problem = builtin_problem('ex6')
    x = np.array([[0.6, 0.0, 0.8], [0.0, 1.0, 0.0]])
    assert np.allclose(np.sum(problem.velocity(x) * x, axis=1), 0.0)


def test_problem_without_exact_solution():
    problem = builtin_problem('ex4')
    assert problem.zero_mean_mode
    with pytest.raises(MissingExactSolution):
        problem.exact_solution([1.0, 1.0, 1.0])


def _surface_points(problem, rng, n=100):
    if problem.problem_id == 'ex2':
        phi, theta = rng.uniform(0.0, 2.0 * np.pi, (2, n))
        ring = 1.0 + 0.6 * np.cos(theta)
        return np.stack([ring * np.cos(phi), ring * np.sin(phi), 0.6 * np.sin(theta)], axis=1)
    t = rng.uniform(0.0, 2.0 * np.pi, n)
    if problem.problem_id == 'ex3':
        x1 = rng.uniform(-1.4, 1.4, n)
        g = 1.0 + 0.5 * np.sin(np.pi * x1)
        s = np.sqrt(1.0 - x1 ** 2 / 4.0)
        return np.stack([x1, s * np.cos(t), 0.5 * g * s * np.sin(t)], axis=1)
    # sphere problems; the point singularities of ex5 sit at the poles
    x3 = rng.uniform(-0.8, 0.8, n)
    s = np.sqrt(1.0 - x3 ** 2)
    return np.stack([s * np.cos(t), s * np.sin(t), x3], axis=1)


def _laplacian(problem, p, step):
    laplacian = -6.0 * problem.exact_solution(p)
    for axis in range(3):
        offset = np.zeros(3)
        offset[axis] = step
        laplacian += problem.exact_solution(p + offset) + problem.exact_solution(p - offset)
    return laplacian / step ** 2


@pytest.mark.parametrize('problem_id, params', [
    ('ex1', {}), ('ex2', {}), ('ex3', {}), ('ex5', {}), ('ex5', {'lam': 0.3}), ('ex6', {'eps': 1e-2}),
    ('ex6', {'eps': 1.0}), ('patch', {}),
])
def test_exact_solution_satisfies_the_equation(problem_id, params, rng):
    problem = builtin_problem(problem_id, **params)
    assert problem.has_exact_solution
    p = _surface_points(problem, rng)
    # the Laplacian of the normal extension equals the Laplace-Beltrami operator on the surface
    step = 2e-3
    laplacian = (4.0 * _laplacian(problem, p, step) - _laplacian(problem, p, 2.0 * step)) / 3.0
    normal = problem.level_set.gradient(p)
    normal /= np.linalg.norm(normal, axis=1)[:, None]
    projector = np.eye(3) - normal[:, :, None] * normal[:, None, :]
    divergence = np.einsum('nij,nji->n', projector, problem.velocity_jacobian(p))
    u = problem.exact_solution(p)
    residual = (-problem.eps * laplacian
                + np.sum(problem.velocity(p) * problem.exact_surface_gradient(p), axis=1)
                + (problem.reaction(p) + divergence) * u
                - problem.rhs(p))
    assert np.max(np.abs(residual)) < 1e-3


def test_builtin_problems_with_exact_solutions_are_all_checked():
    checked = {'ex1', 'ex2', 'ex3', 'ex5', 'ex6', 'patch'}
    assert {cls.problem_id for cls in get_builtin_problems() if cls.has_exact_solution} == checked


@pytest.mark.parametrize('field, start, tol', [
    (Sphere(1.0), [[0.0, 0.3, 1.4], [0.5, -0.2, 0.6]], 1e-12),
    (Torus(1.0, 0.6), [[1.9, 0.0, 0.1], [0.0, 1.2, -0.3]], 1e-12),
    (WavyCigar(), [[1.2, 0.5, 0.2], [-1.0, -0.75, 0.1], [0.0, 1.05, 0.0]], 1e-12),
    (ExpressionField('x1**2 / 4 + x2**2 + x3**2 - 1'), [[1.0, 0.9, 0.1], [-0.5, 0.2, 1.02]], 1e-8),
])
def test_projection_is_idempotent(field, start, tol):
    once = closest_point_project(field, start, tol)
    twice = closest_point_project(field, once, tol)
    np.testing.assert_allclose(twice, once, atol=100.0 * tol)
    assert np.max(np.abs(field.evaluate(once))) <= 10.0 * tol


def test_analytic_velocity_jacobian_matches_differences(rng):
    problem = builtin_problem('ex6', eps=1e-2)
    t = rng.uniform(0.0, 2.0 * np.pi, 20)
    x3 = rng.uniform(-0.8, 0.8, 20)
    s = np.sqrt(1.0 - x3 ** 2)
    x = np.stack([s * np.cos(t), s * np.sin(t), x3], axis=1) * rng.uniform(0.9, 1.1, 20)[:, None]
    analytic = problem.velocity_jacobian(x)
    np.testing.assert_allclose(analytic, problem.velocity_jacobian_by_differences(x), atol=1e-6)
    # the rotation field is divergence free on the sphere
    p = problem.project(x)
    projector = np.eye(3) - p[:, :, None] * p[:, None, :]
    np.testing.assert_allclose(np.einsum('nij,nji->n', projector, analytic), 0.0, atol=1e-12)
