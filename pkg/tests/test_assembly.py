import numpy as np
import pytest
import scipy.sparse

from tracefem.analysis.norms import error_norms
from tracefem.errors import NotApplicable, EmptyTriangulation, UnknownVariant
from tracefem.fem.assembly import assemble, supg_delta, zero_mean_close, coercivity_samples
from tracefem.fem.quadrature import triangle_rule, oracle_rule
from tracefem.geometry.problem import builtin_problem
from tracefem.geometry.problems.sphere_eigenfunction import SphereEigenfunction
from tracefem.pipeline import SolverSettings, solve_on_grid
from tracefem.solver.linear import solve


class LaplaceSphere(SphereEigenfunction):
    """
    Pure Laplace-Beltrami version of the sphere harmonic problem.
    """
    problem_id = ''
    zero_mean_mode = True

    def _reaction_on_surface(self, p):
        return np.zeros(p.shape[0])

    def _rhs_on_surface(self, p):
        return 12.0 * self._harmonic(p)


def _max_difference(a, b):
    return abs(scipy.sparse.csr_matrix(a) - scipy.sparse.csr_matrix(b)).max()


def test_moments_sum_to_area(sphere_problem, refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    system = assemble(sphere_problem, refined_sphere_grid, tri, dofs)
    assert system.moments.sum() == pytest.approx(tri.total_area, rel=1e-12)
    assert system.size == len(dofs)
    assert system.symmetric


def test_stiffness_kernel_is_constants(sphere_problem, refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    for variant in ('surface_gradient', 'full_gradient'):
        system = assemble(sphere_problem, refined_sphere_grid, tri, dofs, variant)
        scale = abs(system.stiffness).max()
        assert np.max(np.abs(system.stiffness @ np.ones(len(dofs)))) <= 1e-12 * scale * len(dofs)


def test_symmetric_variants(sphere_problem, refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    system = assemble(sphere_problem, refined_sphere_grid, tri, dofs)
    assert _max_difference(system.matrix, system.matrix.T) <= 1e-13 * abs(system.matrix).max()
    assert np.all(coercivity_samples(system.matrix, count=20) > 0.0)


def test_mass_matrix_matches_dense_rule(patch_problem, refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    exact = assemble(patch_problem, refined_sphere_grid, tri, dofs, quad=triangle_rule(7))
    dense = assemble(patch_problem, refined_sphere_grid, tri, dofs, quad=oracle_rule())
    assert _max_difference(exact.matrix, dense.matrix) <= 1e-12 * abs(dense.matrix).max()


def test_worker_count_does_not_change_the_system(sphere_problem, refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    serial = assemble(sphere_problem, refined_sphere_grid, tri, dofs)
    threaded = assemble(sphere_problem, refined_sphere_grid, tri, dofs, threads=3)
    assert _max_difference(serial.matrix, threaded.matrix) == 0.0
    np.testing.assert_array_equal(serial.rhs, threaded.rhs)


def test_unknown_variant(sphere_problem, refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    with pytest.raises(UnknownVariant):
        assemble(sphere_problem, refined_sphere_grid, tri, dofs, 'upwind')


def test_empty_triangulation(sphere_problem, refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    empty = type(tri)(tri.grid, tri.vertices, tri.triangles[:0], tri.parents[:0], tri.normals[:0], tri.areas[:0])
    with pytest.raises(EmptyTriangulation):
        assemble(sphere_problem, refined_sphere_grid, empty, dofs)


def test_supg_delta():
    assert supg_delta(0.1, 1.0, 1e-3, 1.0) == pytest.approx(0.05)
    assert supg_delta(0.1, 1.0, 1.0, 1.0) == pytest.approx(1e-3)
    assert supg_delta(0.1, 0.0, 1e-3, 1.0) == pytest.approx(1.0)
    assert supg_delta(0.1, 1.0, 1e-3, 100.0) == pytest.approx(0.01)
    np.testing.assert_allclose(supg_delta(np.array([0.1, 0.2]), np.array([1.0, 1.0]), 1e-3, np.array([1.0, 1.0])),
                               [0.05, 0.1])


def test_supg_system_is_nonsymmetric(refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    problem = builtin_problem('ex6', eps=1e-3)
    system = assemble(problem, refined_sphere_grid, tri, dofs, 'supg')
    assert not system.symmetric
    assert system.advective
    assert np.all(np.isfinite(system.matrix.data))


def test_zero_mean_closure(refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    problem = LaplaceSphere()
    system = assemble(problem, refined_sphere_grid, tri, dofs)
    assert system.augmented
    assert system.size == len(dofs) + 1
    np.testing.assert_allclose(system.matrix[-1, :-1].toarray().ravel(), system.moments)
    assert system.matrix[-1, -1] == 0.0
    assert system.moments.sum() == pytest.approx(tri.total_area)
    u, _ = solve(system)
    assert len(u) == len(dofs)
    assert abs(system.moments @ u) <= 1e-8 * np.max(np.abs(u)) * tri.total_area


def test_zero_mean_closure_needs_pure_diffusion(sphere_problem, refined_sphere_grid, sphere_surface):
    _, tri, dofs = sphere_surface
    system = assemble(sphere_problem, refined_sphere_grid, tri, dofs)
    with pytest.raises(NotApplicable):
        zero_mean_close(system, tri)


def test_patch_test_is_exact(patch_solution):
    np.testing.assert_allclose(patch_solution.u, 1.0, atol=1e-9)


@pytest.mark.parametrize('variant', ['surface_gradient', 'full_gradient'])
def test_variants_converge(sphere_problem, sphere_grid, refined_sphere_grid, variant):
    settings = SolverSettings(variant=variant)
    errors = [error_norms(result.u, sphere_problem, result.tri, result.dofs).l2
              for result in (solve_on_grid(sphere_problem, grid, settings)
                             for grid in (sphere_grid, refined_sphere_grid))]
    assert errors[1] < 0.5 * errors[0]
