"""
This module contains the solution of the assembled trace systems: diagonal scaling, a sparse LU path and a
Krylov path that doubles as a cross-check of the direct one.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse
from scipy.sparse.linalg import splu, cg, bicgstab, minres

from tracefem.errors import SingularMatrix, NoConvergence, ZeroDiagonal, UnknownSolverMethod, IncompatibleShapes
from tracefem.utils import logging

METHODS = ('direct', 'iterative', 'auto')

# Largest system handed to the direct solver in auto mode.
DIRECT_LIMIT = 200000
# Diagonal entries below this fraction of the largest one belong to tiny-cut dofs.
TINY_DIAGONAL = 1e-14
REFINEMENT_STEPS = 3


@dataclass
class LinearSolveReport:
    method: str
    iterations: int
    residual: float
    condition_proxy: float
    dropped: list[int] = field(default_factory=list)


@dataclass(eq=False)
class DiagonalScaling:
    """
    A scaled copy of a matrix restricted to the kept dofs.
    Symmetric scaling: S^-1 A S^-1 with S = diag(sqrt|d|). Row scaling: D^-1 A with D = diag(d).
    """
    matrix: scipy.sparse.csr_matrix
    vector: np.ndarray
    kept: np.ndarray
    size: int
    symmetric: bool

    @property
    def dropped(self) -> np.ndarray:
        mask = np.ones(self.size, dtype=bool)
        mask[self.kept] = False
        return np.flatnonzero(mask)

    def scale_rhs(self, b: np.ndarray) -> np.ndarray:
        return np.asarray(b, dtype=float)[self.kept] / self.vector

    def unscale(self, y: np.ndarray) -> np.ndarray:
        x = np.zeros(self.size)
        x[self.kept] = y / self.vector if self.symmetric else y
        return x


def is_symmetric(matrix, tol: float = 1e-12) -> bool:
    matrix = scipy.sparse.csr_matrix(matrix)
    scale = abs(matrix).max() if matrix.nnz else 0.0
    difference = matrix - matrix.T
    return difference.nnz == 0 or abs(difference).max() <= tol * scale


def diagonal_scale(matrix, symmetric: bool | None = None, protected=()) -> DiagonalScaling:
    """
    Scale a matrix by its diagonal, dropping tiny-cut dofs.
    Args:
        matrix: The square sparse matrix.
        symmetric: Use the symmetric scaling; detected when None.
        protected: Indices that are never dropped and keep a unit scaling (zero-mean multiplier).
    returns:
        The DiagonalScaling.
    """
    matrix = scipy.sparse.csr_matrix(matrix, dtype=float)
    size = matrix.shape[0]
    if symmetric is None:
        symmetric = is_symmetric(matrix)
    diagonal = matrix.diagonal()
    protected = np.asarray(protected, dtype=np.int64)
    magnitude = np.abs(diagonal)
    magnitude[protected] = 0.0
    largest = magnitude.max() if size else 0.0
    keep = magnitude >= TINY_DIAGONAL * largest
    keep &= magnitude > 0.0
    keep[protected] = True
    if not np.any(keep & (magnitude > 0.0)) and len(protected) < size:
        raise ZeroDiagonal(np.flatnonzero(~keep).tolist())
    dropped = np.flatnonzero(~keep)
    if len(dropped):
        logging.warning(f'Dropped {len(dropped)} tiny-cut dofs : "{dropped.tolist()}"')

    kept = np.flatnonzero(keep)
    if symmetric:
        vector = np.sqrt(np.abs(diagonal[kept]))
    else:
        vector = diagonal[kept].copy()
    unit = np.isin(kept, protected)
    vector[unit] = 1.0
    inverse = scipy.sparse.diags(1.0 / vector)
    restricted = matrix[kept][:, kept]
    scaled = inverse @ restricted @ inverse if symmetric else inverse @ restricted
    return DiagonalScaling(matrix=scaled.tocsr(), vector=vector, kept=kept, size=size, symmetric=symmetric)


def _direct(matrix: scipy.sparse.csr_matrix, rhs: np.ndarray) -> tuple[np.ndarray, int]:
    try:
        lu = splu(matrix.tocsc(), permc_spec='COLAMD')
    except RuntimeError as e:
        raise SingularMatrix(f'Sparse LU failed : "{e}"')
    y = lu.solve(rhs)
    for _ in range(REFINEMENT_STEPS):
        y = y + lu.solve(rhs - matrix @ y)
    if not np.all(np.isfinite(y)):
        raise SingularMatrix('Sparse LU produced non-finite values')
    return y, 0


def _iterative(matrix: scipy.sparse.csr_matrix, rhs: np.ndarray, symmetric: bool, definite: bool,
               tol: float) -> tuple[np.ndarray, int]:
    count = [0]

    def callback(*_):
        count[0] += 1

    if symmetric and definite:
        method = cg
    elif symmetric:
        method = minres
    else:
        method = bicgstab
    maxiter = max(1000, 10 * matrix.shape[0])
    y, info = method(matrix, rhs, rtol=tol, maxiter=maxiter, callback=callback)
    if info != 0:
        residual = np.linalg.norm(rhs - matrix @ y) / max(np.linalg.norm(rhs), 1e-300)
        raise NoConvergence(count[0], float(residual))
    return y, count[0]


def solve_linear(matrix, rhs, method: str = 'auto', tol: float = 1e-10, symmetric: bool | None = None,
                 protected=()) -> tuple[np.ndarray, LinearSolveReport]:
    """
    Solve A x = b after diagonal scaling.
    Args:
        matrix: The square sparse matrix A.
        rhs: The vector b.
        method: direct, iterative or auto (direct up to DIRECT_LIMIT unknowns).
        tol: Requested relative residual |A x - b| / |b| of the unscaled system.
        symmetric: Whether A is symmetric; detected when None.
        protected: Indices excluded from the tiny-cut drop.
    returns:
        The solution and its LinearSolveReport.
    """
    if method not in METHODS:
        raise UnknownSolverMethod(f'Unknown solver method : "{method}"')
    matrix = scipy.sparse.csr_matrix(matrix, dtype=float)
    matrix.eliminate_zeros()
    rhs = np.asarray(rhs, dtype=float)
    if matrix.shape[0] != matrix.shape[1] or matrix.shape[0] != len(rhs):
        raise IncompatibleShapes(f'Incompatible system shapes : "{matrix.shape} {rhs.shape}"')
    empty = np.flatnonzero(np.diff(matrix.indptr) == 0)
    if len(empty):
        raise SingularMatrix(f'Matrix row is zero : "{int(empty[0])}"', dof=int(empty[0]))
    scaling = diagonal_scale(matrix, symmetric, protected)
    symmetric = scaling.symmetric
    if method == 'auto':
        method = 'direct' if matrix.shape[0] <= DIRECT_LIMIT else 'iterative'

    norm = np.linalg.norm(rhs)
    if norm == 0.0:
        x = np.zeros(matrix.shape[0])
        return x, LinearSolveReport(method, 0, 0.0, _condition_proxy(matrix), scaling.dropped.tolist())

    scaled_rhs = scaling.scale_rhs(rhs)
    if method == 'direct':
        y, iterations = _direct(scaling.matrix, scaled_rhs)
    else:
        definite = len(protected) == 0 and np.all(scaling.matrix.diagonal() > 0.0)
        y, iterations = _iterative(scaling.matrix, scaled_rhs, symmetric, definite, 0.1 * tol)
        for _ in range(REFINEMENT_STEPS):
            x = scaling.unscale(y)
            if _relative_residual(matrix, x, rhs, scaling.kept) <= tol:
                break
            correction, more = _iterative(scaling.matrix, scaling.scale_rhs(rhs - matrix @ x), symmetric,
                                          definite, 0.1 * tol)
            y = y + correction
            iterations += more
    x = scaling.unscale(y)
    residual = _relative_residual(matrix, x, rhs, scaling.kept)
    if residual > tol:
        if method == 'iterative':
            raise NoConvergence(iterations, residual)
        logging.warning(f'Direct solve residual above tolerance : "{residual:.3e}"')
    logging.debug(f'Solved {matrix.shape[0]} unknowns ({method}), relative residual {residual:.3e}')
    return x, LinearSolveReport(method, iterations, residual, _condition_proxy(matrix), scaling.dropped.tolist())


def _relative_residual(matrix, x, rhs, kept) -> float:
    """
    Relative residual over the kept equations (dropped dofs carry no equation).
    """
    r = (rhs - matrix @ x)[kept]
    return float(np.linalg.norm(r) / max(np.linalg.norm(rhs[kept]), 1e-300))


def _condition_proxy(matrix) -> float:
    diagonal = np.abs(matrix.diagonal())
    diagonal = diagonal[diagonal > 0.0]
    return float(diagonal.max() / diagonal.min()) if len(diagonal) else float('inf')


def solve(system, tol: float = 1e-10, method: str = 'auto') -> tuple[np.ndarray, LinearSolveReport]:
    """
    Solve a TraceSystem.
    returns:
        The dof vector of u_h (the multiplier of an augmented system is removed) and the LinearSolveReport.
    """
    protected = [system.size - 1] if system.augmented else []
    x, report = solve_linear(system.matrix, system.rhs, method, tol, system.symmetric, protected)
    return system.split(x), report
