import numpy as np

from tracefem.fem.dofs import build_dof_map
from tracefem.mesh.marching import extract_surface
from tracefem.mesh.octree import refine_band
from tracefem.mesh.trilinear import interpolate_levelset


def test_dofs_are_free_masters_of_band_corners(sphere_surface, refined_sphere_grid):
    _, tri, dofs = sphere_surface
    grid = refined_sphere_grid
    constraint = grid.constraint.tolil()
    expected = set()
    for cell in np.unique(tri.parents).tolist():
        for node in grid.cell_nodes[cell].tolist():
            expected.update(j for j, weight in zip(constraint.rows[node], constraint.data[node]) if weight != 0.0)
    assert set(dofs.nodes.tolist()) == expected
    assert np.all(grid.free_mask[dofs.nodes])


def test_band_contains_hanging_corners(sphere_surface):
    _, _, dofs = sphere_surface
    assert len(dofs.constrained_nodes) > 0
    assert not np.any(np.isin(dofs.constrained_nodes, dofs.nodes))


def test_expansion_reproduces_constants(sphere_surface):
    _, tri, dofs = sphere_surface
    corners = dofs.corner_values(np.ones(len(dofs)), tri.parents)
    np.testing.assert_allclose(corners, 1.0)


def test_nodal_values_at_free_corners(sphere_surface, rng):
    _, _, dofs = sphere_surface
    u = rng.standard_normal(len(dofs))
    corners = np.unique(dofs.grid.cell_nodes[dofs.cells])
    inside = np.isin(dofs.nodes, corners)
    np.testing.assert_allclose(dofs.nodal(u)[dofs.nodes[inside]], u[inside])
    np.testing.assert_array_equal(dofs.node_to_dof[dofs.nodes], np.arange(len(dofs)))


def test_interpolation_of_affine_function_is_exact(sphere_surface):
    _, tri, dofs = sphere_surface
    grid = dofs.grid

    def affine(x):
        return 1.0 - x[:, 0] + 3.0 * x[:, 2]

    corners = dofs.corner_values(dofs.interpolate(affine), tri.parents)
    exact = affine(grid.node_points[grid.cell_nodes[tri.parents]].reshape(-1, 3)).reshape(-1, 8)
    np.testing.assert_allclose(corners, exact, atol=1e-13)


def test_dof_count_grows_about_fourfold(sphere_problem, refined_sphere_grid, sphere_surface):
    _, _, coarse = sphere_surface
    grid = refine_band(refined_sphere_grid, sphere_problem.level_set)
    tri = extract_surface(grid, interpolate_levelset(grid, sphere_problem.level_set))
    fine = build_dof_map(grid, tri)
    assert 3.2 <= len(fine) / len(coarse) <= 4.8
