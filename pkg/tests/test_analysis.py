import numpy as np
import pytest

from tracefem.analysis.eoc import rate, dof_rate, eoc_rates, eoc_rows, eoc_table
from tracefem.analysis.norms import ErrorReport, error_norms, restricted_error, exterior_region, nodal_interpolant
from tracefem.analysis.shishkin import build_shishkin_grid, shishkin_sequence
from tracefem.errors import EmptyRegion, NonDivisibleResolution, MissingExactSolution, InvalidStrip
from tracefem.geometry.level_set import Sphere
from tracefem.geometry.problem import builtin_problem
from tracefem.mesh.octree import build_uniform, audit_balance


def _report(dofs, h, l2, h1=None, linf=None):
    return ErrorReport(dofs=dofs, h_max=h, l2=l2, h1_semi=h1 or l2, h1=h1 or l2, linf=linf or l2, triangles=dofs)


def test_rates():
    assert rate(1e-2, 2.5e-3, 0.2, 0.1) == pytest.approx(2.0)
    assert dof_rate(1.0, 0.25, 100, 400) == pytest.approx(2.0)
    assert dof_rate(1.0, 0.5, 100, 400) == pytest.approx(1.0)
    assert rate(0.0, 1e-3, 0.2, 0.1) is None
    assert dof_rate(1.0, 0.5, 100, 100) is None


def test_rate_sequences():
    reports = [_report(100, 0.2, 1e-2), _report(400, 0.1, 2.5e-3), _report(1600, 0.05, 6.25e-4)]
    rates = eoc_rates(reports, 'l2')
    assert rates[0] is None
    assert rates[1:] == pytest.approx([2.0, 2.0])
    assert eoc_rates(reports, 'l2', 'dofs')[1:] == pytest.approx([2.0, 2.0])
    rows = eoc_rows(reports, 'surface_gradient')
    assert rows[0]['l2_rate'] == ''
    assert rows[2]['l2_rate'] == pytest.approx(2.0)
    assert rows[1]['variant'] == 'surface_gradient'


def test_table_with_a_single_grid_has_no_rates():
    lines = list(eoc_table([_report(292, 0.25, 1.5e-2)], title='ex1'))
    assert lines[0] == 'ex1'
    assert lines[1].split()[0] == '#d.o.f.'
    assert lines[2].split() == ['292', '1.500e-02', '1.500e-02', '1.500e-02']


def test_table_columns():
    lines = list(eoc_table([_report(100, 0.2, 1e-2), _report(400, 0.1, 2.5e-3)]))
    assert lines[0].split() == ['#d.o.f.', 'L2', 'error', 'rate', 'H1', 'error', 'rate', 'Linf', 'error', 'rate']
    assert lines[2].split()[2] == '2.00'


def test_nodal_interpolant_error_is_small(sphere_problem, sphere_surface):
    _, tri, dofs = sphere_surface
    report = error_norms(nodal_interpolant(sphere_problem, dofs), sphere_problem, tri, dofs)
    assert report.dofs == len(dofs)
    assert report.h_max == pytest.approx(0.25)
    assert 0.0 < report.l2 < report.h1
    assert report.linf >= report.l2 / np.sqrt(tri.total_area)


def test_restricted_norms(sphere_problem, sphere_surface):
    _, tri, dofs = sphere_surface
    u = nodal_interpolant(sphere_problem, dofs)
    full = error_norms(u, sphere_problem, tri, dofs)
    exterior = restricted_error(u, sphere_problem, tri, dofs, exterior_region(0.3), region='exterior')
    assert exterior.region == 'exterior'
    assert exterior.triangles < full.triangles
    assert exterior.l2 <= full.l2
    with pytest.raises(EmptyRegion):
        restricted_error(u, sphere_problem, tri, dofs, exterior_region(5.0))


def test_norms_need_an_exact_solution(sphere_surface):
    _, tri, dofs = sphere_surface
    with pytest.raises(MissingExactSolution):
        error_norms(np.zeros(len(dofs)), builtin_problem('ex4'), tri, dofs)


def test_shishkin_grid_with_equal_sizes_is_uniform():
    grid = build_shishkin_grid((-2.0, 2.0), 0.5, 0.5, 0.5)
    assert grid == build_uniform((-2.0, 2.0), 0.5)


def test_shishkin_grid_parameters():
    with pytest.raises(NonDivisibleResolution):
        build_shishkin_grid((-2.0, 2.0), 0.5, 1.0 / 6.0, 0.5)
    with pytest.raises(InvalidStrip):
        build_shishkin_grid((-2.0, 2.0), 0.01, 0.125, 0.5)


def test_shishkin_grid_refines_the_strip():
    sphere = Sphere(1.0)
    grid = build_shishkin_grid((-2.0, 2.0), 0.125, 0.125, 0.5, sphere)
    finest = np.isclose(grid.cell_h, 0.125)
    assert np.any(finest)
    lower = grid.cell_lower[finest, 2]
    upper = lower + grid.cell_h[finest]
    assert np.all((lower < 0.125 + 0.125) & (upper > -0.125 - 0.125))
    assert audit_balance(grid) == []
    sequence = shishkin_sequence(grid, sphere, 1)
    assert len(sequence) == 2
    assert sequence[1].cell_h.min() == pytest.approx(0.0625)
