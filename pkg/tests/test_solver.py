import numpy as np
import pytest
import scipy.sparse

from tracefem.errors import SingularMatrix, ZeroDiagonal, UnknownSolverMethod
from tracefem.solver.linear import solve_linear, diagonal_scale, is_symmetric, solve


def test_diagonal_system():
    matrix = scipy.sparse.diags([4.0, 9.0])
    for method in ('direct', 'iterative'):
        x, report = solve_linear(matrix, [8.0, 27.0], method)
        np.testing.assert_allclose(x, [2.0, 3.0])
        assert report.method == method
        assert report.dropped == []


def test_nonsymmetric_system():
    matrix = scipy.sparse.csr_matrix([[2.0, 1.0], [0.0, 3.0]])
    assert not is_symmetric(matrix)
    for method in ('direct', 'iterative'):
        x, _ = solve_linear(matrix, [3.0, 3.0], method)
        np.testing.assert_allclose(x, [1.0, 1.0])


def test_zero_row_is_singular():
    matrix = scipy.sparse.csr_matrix([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 2.0]])
    with pytest.raises(SingularMatrix) as info:
        solve_linear(matrix, [1.0, 1.0, 1.0])
    assert info.value.dof == 1


def test_zero_rhs():
    x, report = solve_linear(scipy.sparse.diags([1.0, 2.0]), [0.0, 0.0])
    np.testing.assert_array_equal(x, 0.0)
    assert report.residual == 0.0


def test_unknown_method():
    with pytest.raises(UnknownSolverMethod):
        solve_linear(scipy.sparse.diags([1.0]), [1.0], 'jacobi')


def test_tiny_diagonal_is_dropped():
    matrix = scipy.sparse.diags([1.0, 1e-20, 2.0])
    scaling = diagonal_scale(matrix)
    assert scaling.dropped.tolist() == [1]
    x, report = solve_linear(matrix, [1.0, 1.0, 4.0])
    assert report.dropped == [1]
    np.testing.assert_allclose(x, [1.0, 0.0, 2.0])


def test_all_zero_diagonal():
    matrix = scipy.sparse.csr_matrix([[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(ZeroDiagonal):
        diagonal_scale(matrix)


def test_protected_multiplier_keeps_unit_scaling():
    matrix = scipy.sparse.csr_matrix([[2.0, 1.0], [1.0, 0.0]])
    scaling = diagonal_scale(matrix, protected=[1])
    assert scaling.dropped.tolist() == []
    assert scaling.vector[1] == 1.0
    x, _ = solve_linear(matrix, [3.0, 1.0], protected=[1])
    np.testing.assert_allclose(x, [1.0, 1.0])


def test_scaling_invariance(rng):
    dense = rng.standard_normal((6, 6))
    matrix = scipy.sparse.csr_matrix(dense @ dense.T + 6.0 * np.eye(6))
    b = rng.standard_normal(6)
    x, _ = solve_linear(matrix, b)
    y, _ = solve_linear(1e6 * matrix, 1e6 * b)
    np.testing.assert_allclose(x, y, rtol=1e-10)


def test_direct_and_iterative_agree(patch_solution):
    system = patch_solution.system
    direct, _ = solve(system, 1e-11, 'direct')
    iterative, report = solve(system, 1e-11, 'iterative')
    assert report.iterations > 0
    np.testing.assert_allclose(direct, iterative, atol=1e-6)
