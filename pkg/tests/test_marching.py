import numpy as np
import pytest

from tracefem.errors import EmptyBand, BoundaryEdge
from tracefem.geometry.level_set import Plane, Sphere, Torus, SixHandleSurface
from tracefem.io.vtk import surface_lines, grid_lines
from tracefem.mesh.marching import extract_surface
from tracefem.mesh.octree import build_uniform, refine_band
from tracefem.mesh.quality import geometry_quality, audit_watertight, audit_containment, audit_orientation, \
    max_vertex_value
from tracefem.mesh.trilinear import interpolate_levelset


def _surface(grid, ls):
    field = interpolate_levelset(grid, ls)
    return field, extract_surface(grid, field)


def test_plane_section_of_one_cell():
    grid = build_uniform((0.0, 1.0), 1.0)
    _, tri = _surface(grid, Plane((0.0, 0.0, 1.0), 0.5))
    assert len(tri) == 2
    assert tri.total_area == pytest.approx(1.0)
    np.testing.assert_allclose(tri.normals, [[0.0, 0.0, 1.0]] * 2)
    np.testing.assert_allclose(tri.vertices[:, 2], 0.5)


def test_plane_section_is_exact_on_a_grid():
    grid = build_uniform((0.0, 1.0), 0.25)
    field, tri = _surface(grid, Plane((0.0, 0.0, 1.0), 0.3))
    assert tri.total_area == pytest.approx(1.0, rel=1e-12)
    assert np.all(tri.triangles_per_cell() == 2)
    assert len(tri.cells) == 16
    assert audit_containment(tri)
    assert audit_orientation(tri, field)
    assert max_vertex_value(tri, field) <= 1e-12
    with pytest.raises(BoundaryEdge):
        tri.edge_table


def test_sphere_is_closed_and_oriented(sphere_grid):
    field, tri = _surface(sphere_grid, Sphere(1.0))
    assert audit_watertight(tri)
    assert tri.euler_characteristic == 2
    assert audit_containment(tri)
    assert audit_orientation(tri, field)


def test_sphere_with_hanging_nodes_is_crack_free(sphere_surface):
    field, tri, _ = sphere_surface
    assert audit_watertight(tri)
    assert tri.euler_characteristic == 2
    assert audit_containment(tri)
    assert max_vertex_value(tri, field) <= 1e-10
    assert tri.total_area == pytest.approx(4.0 * np.pi, rel=0.05)


def test_every_triangle_belongs_to_a_cut_cell(sphere_surface):
    field, tri, _ = sphere_surface
    corners = field.cell_values(tri.cells)
    assert np.all(corners.min(axis=1) <= 0.0)
    assert np.all(corners.max(axis=1) >= 0.0)


def test_torus_topology():
    torus = Torus(1.0, 0.6)
    grid = refine_band(build_uniform((-2.0, 2.0), 0.25), torus)
    _, tri = _surface(grid, torus)
    assert audit_watertight(tri)
    assert tri.euler_characteristic == 0


def test_geometry_error_decreases_with_refinement(sphere_problem, sphere_grid, refined_sphere_grid):
    coarse = geometry_quality(_surface(sphere_grid, sphere_problem.level_set)[1], sphere_problem.level_set)
    fine = geometry_quality(_surface(refined_sphere_grid, sphere_problem.level_set)[1], sphere_problem.level_set)
    assert fine.max_distance < coarse.max_distance
    assert fine.max_distance < 0.05
    assert fine.max_normal_error < coarse.max_normal_error


def test_uncut_grid_has_no_surface():
    grid = build_uniform((0.0, 1.0), 0.5)
    field = interpolate_levelset(grid, Plane((0.0, 0.0, 1.0), 2.0))
    with pytest.raises(EmptyBand):
        extract_surface(grid, field)


def test_vtk_lines(sphere_surface):
    _, tri, _ = sphere_surface
    lines = list(surface_lines(tri, np.zeros(len(tri.vertices))))
    assert lines[0] == '# vtk DataFile Version 2.0'
    assert 'DATASET POLYDATA' in lines
    assert f'POLYGONS {len(tri)} {4 * len(tri)}' in lines
    assert f'POINT_DATA {len(tri.vertices)}' in lines
    grid = list(grid_lines(build_uniform((0.0, 1.0), 0.5)))
    assert 'CELLS 8 72' in grid
    assert grid.count('12') == 8


def test_triangles_per_cell_are_bounded(sphere_surface):
    _, tri, _ = sphere_surface
    assert tri.triangles_per_cell().max() <= 12
    torus = Torus(1.0, 0.6)
    grid = build_uniform((-2.0, 2.0), 0.5)
    for _ in range(3):
        grid = refine_band(grid, torus)
    _, tri = _surface(grid, torus)
    assert tri.triangles_per_cell().max() <= 12


def test_six_handle_topology_is_stable_under_refinement():
    surface = SixHandleSurface()
    grid = refine_band(build_uniform((-3.0, 3.0), 0.25), surface)
    _, coarse = _surface(grid, surface)
    _, fine = _surface(refine_band(grid, surface), surface)
    assert audit_watertight(coarse) and audit_watertight(fine)
    assert coarse.euler_characteristic % 2 == 0
    assert fine.euler_characteristic == coarse.euler_characteristic
