"""
This module contains the assembly of the trace finite element system

    eps (grad_G u, grad_G v) - (u, w . grad_G v) + (c u, v) = (f, v)

on the discrete surface Gamma_h, in the surface-gradient, full-gradient and SUPG variants.
Local 8x8 matrices are computed per triangle from the trilinear basis of its parent cell, accumulated as
coordinate triplets over grid nodes and reduced to the dofs by the constraint expansion C: A = C^T A_node C.
"""
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
import scipy.sparse

from tracefem.errors import EmptyTriangulation, NonFiniteEntry, NotApplicable, UnknownVariant
from tracefem.fem.dofs import DofMap
from tracefem.fem.quadrature import QuadratureRule, triangle_rule
from tracefem.geometry.problem import SurfaceProblem
from tracefem.mesh.marching import SurfaceTriangulation
from tracefem.mesh.octree import OctreeGrid
from tracefem.mesh.trilinear import basis_arrays
from tracefem.utils import logging, projectors

VARIANTS = ('surface_gradient', 'full_gradient', 'supg')

# Default SUPG constants.
DELTA0 = 0.5
DELTA1 = 0.1

# Triangles per assembly chunk. Fixed so that the reduction order does not depend on the worker count.
CHUNK = 2048


@dataclass(eq=False)
class TraceSystem:
    """
    The assembled system over the dofs of a DofMap.
    When augmented, matrix and rhs carry one extra multiplier row and column for the zero-mean condition.
    """
    matrix: scipy.sparse.csr_matrix
    rhs: np.ndarray
    variant: str
    dofs: DofMap
    # eps-diffusion part alone, for kernel checks.
    stiffness: scipy.sparse.csr_matrix
    # m_i, the integrals of the basis functions over Gamma_h.
    moments: np.ndarray
    rhs_integral: float
    area: float
    max_reaction: float
    advective: bool
    triangle_count: int
    band_size: int
    augmented: bool = False

    @property
    def size(self) -> int:
        return self.matrix.shape[0]

    @property
    def symmetric(self) -> bool:
        return not self.advective and self.variant != 'supg'

    def split(self, x: np.ndarray) -> np.ndarray:
        """
        The dof part of a solution vector (drops the multiplier of an augmented system).
        """
        return np.asarray(x)[:len(self.dofs)]


def supg_delta(h, w_max, eps: float, c_max, delta0: float = DELTA0, delta1: float = DELTA1):
    """
    SUPG parameter of triangles from their parent cell size and local data.
    Args:
        h: Parent cell sizes.
        w_max: Maximum of |w| over each triangle.
        eps: Diffusion coefficient (> 0).
        c_max: Maximum of the reaction coefficient over each triangle.
        delta0: Constant of the convection-dominated branch.
        delta1: Constant of the diffusion-dominated branch.
    returns:
        delta_T = min(delta0 h / |w| if Pe_T > 1 else delta1 h^2 / eps, 1 / c_max) with Pe_T = h |w| / (2 eps).
    """
    h, w_max, c_max = (np.asarray(a, dtype=float) for a in (h, w_max, c_max))
    peclet = h * w_max / (2.0 * eps)
    convective = delta0 * h / np.where(w_max > 0.0, w_max, 1.0)
    diffusive = delta1 * h ** 2 / eps
    tilde = np.where(peclet > 1.0, convective, diffusive)
    delta = np.minimum(tilde, 1.0 / np.maximum(c_max, np.finfo(float).tiny))
    return float(delta) if delta.ndim == 0 else delta


def _local_chunk(problem: SurfaceProblem, grid: OctreeGrid, tri: SurfaceTriangulation, rule: QuadratureRule,
                 variant: str, delta0: float, delta1: float, triangles: slice) -> dict:
    """
    Local matrices and vectors of a range of triangles.
    """
    parents = tri.parents[triangles]
    h = grid.cell_h[parents]
    areas = tri.areas[triangles]
    points = rule.physical_points(tri.corners[triangles])
    n, q = points.shape[:2]
    data = problem.surface_data(points.reshape(-1, 3))
    reaction = data.reaction.reshape(n, q)
    f = data.rhs.reshape(n, q)

    xi = np.clip((points - grid.cell_lower[parents][:, None, :]) / h[:, None, None], 0.0, 1.0)
    basis = basis_arrays(xi, h[:, None], hessians=(variant == 'supg'))
    values, gradients = basis[0], basis[1]
    projector = projectors(tri.normals[triangles])
    tangential = np.einsum('nqad,nde->nqae', gradients, projector)
    weights = areas[:, None] * rule.weights[None, :]

    diffusion_gradients = gradients if variant == 'full_gradient' else tangential
    stiffness = problem.eps * np.einsum('nq,nqid,nqjd->nij', weights, diffusion_gradients, diffusion_gradients)
    mass = np.einsum('nq,nq,nqi,nqj->nij', weights, reaction, values, values)
    matrix = stiffness + mass
    rhs = np.einsum('nq,nq,nqi->ni', weights, f, values)

    if data.velocity is not None:
        velocity = data.velocity.reshape(n, q, 3)
        streamline = np.einsum('nqd,nqid->nqi', velocity, tangential)
        matrix -= np.einsum('nq,nqi,nqj->nij', weights, streamline, values)
        if variant == 'supg':
            jacobian = problem.velocity_jacobian(points.reshape(-1, 3)).reshape(n, q, 3, 3)
            divergence = np.einsum('nde,nqed->nq', projector, jacobian)
            laplacian = np.einsum('nde,nqjed->nqj', projector, basis[2])
            residual = -problem.eps * laplacian + streamline + (reaction + divergence)[:, :, None] * values
            delta = supg_delta(h, np.linalg.norm(velocity, axis=2).max(axis=1), problem.eps, reaction.max(axis=1),
                               delta0, delta1)
            matrix += np.einsum('n,nq,nqi,nqj->nij', delta, weights, streamline, residual)
            rhs += np.einsum('n,nq,nq,nqi->ni', delta, weights, f, streamline)

    nodes = grid.cell_nodes[parents]
    return {'rows': np.repeat(nodes, 8, axis=1).ravel(),
            'cols': np.tile(nodes, (1, 8)).ravel(),
            'matrix': matrix.reshape(-1),
            'stiffness': stiffness.reshape(-1),
            'nodes': nodes.ravel(),
            'rhs': rhs.ravel(),
            'moments': np.einsum('nq,nqi->ni', weights, values).ravel(),
            'rhs_integral': float(np.sum(weights * f)),
            'max_reaction': float(np.max(np.abs(reaction)))}


def assemble(problem: SurfaceProblem, grid: OctreeGrid, tri: SurfaceTriangulation, dofs: DofMap,
             variant: str = 'surface_gradient', quad: QuadratureRule | None = None, delta0: float = DELTA0,
             delta1: float = DELTA1, threads: int = 1) -> TraceSystem:
    """
    Assemble the trace system of a problem.
    Args:
        problem: The surface problem.
        grid: The grid.
        tri: The discrete surface extracted on the grid.
        dofs: The dof map of the triangulation.
        variant: surface_gradient, full_gradient or supg.
        quad: The triangle rule (degree 4 by default).
        delta0: SUPG constant of the convection-dominated branch.
        delta1: SUPG constant of the diffusion-dominated branch.
        threads: Worker threads; the result does not depend on it.
    returns:
        The TraceSystem, closed by the zero-mean condition for pure Laplace-Beltrami problems.
    """
    if variant not in VARIANTS:
        raise UnknownVariant(f'Unknown variant : "{variant}"')
    if len(tri) == 0:
        raise EmptyTriangulation('The triangulation has no triangles')
    rule = quad or triangle_rule(4)
    chunks = [slice(start, min(start + CHUNK, len(tri))) for start in range(0, len(tri), CHUNK)]

    def work(triangles):
        return _local_chunk(problem, grid, tri, rule, variant, delta0, delta1, triangles)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as executor:
            parts = list(executor.map(work, chunks))
    else:
        parts = [work(triangles) for triangles in chunks]

    def merged(name):
        return np.concatenate([part[name] for part in parts])

    count = grid.vertex_count
    rows, cols = merged('rows'), merged('cols')
    expansion = dofs.expansion
    node_matrix = scipy.sparse.coo_matrix((merged('matrix'), (rows, cols)), shape=(count, count)).tocsr()
    node_stiffness = scipy.sparse.coo_matrix((merged('stiffness'), (rows, cols)), shape=(count, count)).tocsr()
    nodes = merged('nodes')
    node_rhs = np.bincount(nodes, weights=merged('rhs'), minlength=count)
    node_moments = np.bincount(nodes, weights=merged('moments'), minlength=count)

    matrix = (expansion.T @ node_matrix @ expansion).tocsr()
    rhs = expansion.T @ node_rhs
    if not (np.all(np.isfinite(matrix.data)) and np.all(np.isfinite(rhs))):
        raise NonFiniteEntry(f'Non-finite entries in the assembled system : "{variant}"')
    logging.debug(f'Assembled {variant} system: {len(dofs)} dofs, {matrix.nnz} nonzeros, {len(tri)} triangles')
    system = TraceSystem(matrix=matrix,
                         rhs=rhs,
                         variant=variant,
                         dofs=dofs,
                         stiffness=(expansion.T @ node_stiffness @ expansion).tocsr(),
                         moments=expansion.T @ node_moments,
                         rhs_integral=sum(part['rhs_integral'] for part in parts),
                         area=tri.total_area,
                         max_reaction=max(part['max_reaction'] for part in parts),
                         advective=problem.has_velocity,
                         triangle_count=len(tri),
                         band_size=len(dofs.cells))
    if problem.zero_mean_mode:
        system = zero_mean_close(system, tri)
    return system


def zero_mean_close(system: TraceSystem, tri: SurfaceTriangulation) -> TraceSystem:
    """
    Close a pure Laplace-Beltrami system with the condition int u_h = 0.
    The rhs is shifted by its mean so that int f_h = 0, and one multiplier row and column m_i = int psi_i is
    appended.
    Args:
        system: A system without reaction and advection.
        tri: The triangulation the system was assembled on.
    returns:
        The augmented TraceSystem.
    """
    if system.max_reaction > 0.0 or system.advective:
        raise NotApplicable('The zero-mean closure needs c = 0 and w = 0')
    if system.augmented:
        return system
    moments = system.moments
    shifted = system.rhs - system.rhs_integral / tri.total_area * moments
    column = scipy.sparse.csr_matrix(moments[:, None])
    matrix = scipy.sparse.bmat([[system.matrix, column], [column.T, None]], format='csr')
    return TraceSystem(matrix=matrix,
                       rhs=np.append(shifted, 0.0),
                       variant=system.variant,
                       dofs=system.dofs,
                       stiffness=system.stiffness,
                       moments=moments,
                       rhs_integral=0.0,
                       area=system.area,
                       max_reaction=system.max_reaction,
                       advective=system.advective,
                       triangle_count=system.triangle_count,
                       band_size=system.band_size,
                       augmented=True)


def coercivity_samples(matrix, count: int = 100, seed: int = 0) -> np.ndarray:
    """
    Values v^T (A + A^T)/2 v / |v|^2 for random vectors v.
    """
    rng = np.random.default_rng(seed)
    samples = np.empty(count)
    for n in range(count):
        v = rng.standard_normal(matrix.shape[0])
        samples[n] = float(v @ (matrix @ v)) / float(v @ v)
    return samples
