"""
This module contains the differential geometry of implicit surfaces: unit normals, tangential projectors,
the shape operator H and the closest-point projection onto the zero level set.
"""
from dataclasses import dataclass

import numpy as np

from tracefem.errors import DegenerateGradient, NonConvergence
from tracefem.geometry.level_set import LevelSetField
from tracefem.utils import as_points, restore, unit_vectors, projectors

# Smallest admissible gradient length.
MIN_GRADIENT = 1e-8


@dataclass
class SurfaceDiffData:
    """
    Differential data of the level set at one point or at an array of points (leading axes shared by all fields).
    """
    point: np.ndarray
    signed_value: np.ndarray
    unit_normal: np.ndarray
    projector: np.ndarray
    hessian_of_distance: np.ndarray
    mean_curvature_trace: np.ndarray


def normal_hessian(ls: LevelSetField, x) -> SurfaceDiffData:
    """
    Compute n = grad phi / |grad phi|, P = I - n n^T and H = P hess(phi) P / |grad phi|.
    Args:
        ls: The level set.
        x: A point or an array of points.
    returns:
        The SurfaceDiffData at the given points.
    """
    points, leading = as_points(x)
    normal, length = unit_vectors(ls.gradient(points))
    if np.any(length < MIN_GRADIENT):
        raise DegenerateGradient(f'Level set gradient vanishes near : "{points[np.argmin(length)]}"')
    projector = projectors(normal)
    hessian = projector @ ls.hessian(points) @ projector / length[:, None, None]
    return SurfaceDiffData(point=restore(points, leading),
                           signed_value=restore(ls.evaluate(points), leading),
                           unit_normal=restore(normal, leading),
                           projector=restore(projector, leading),
                           hessian_of_distance=restore(hessian, leading),
                           mean_curvature_trace=restore(np.trace(hessian, axis1=1, axis2=2), leading))


def closest_point_project(ls: LevelSetField, x, tol: float = 1e-12, max_iterations: int = 50) -> np.ndarray:
    """
    Project points onto the zero level set along the surface normal.
    Exact distance fields use their closed form p = x - phi(x) n(x). Other fields use a damped Newton iteration
    along the initial gradient direction followed by tangential corrections until x - p is normal to the surface.
    Args:
        ls: The level set.
        x: A point or an array of points within the working band.
        tol: Tolerance on |phi(p)| / max(1, |grad phi(p)|) and on the tangential part of x - p.
        max_iterations: Iteration limit of each stage.
    returns:
        The projected points, in the layout of x.
    """
    points, leading = as_points(x)
    gradient = ls.gradient(points)
    length = np.linalg.norm(gradient, axis=1)
    if np.any(length < MIN_GRADIENT):
        raise DegenerateGradient(f'Level set gradient vanishes near : "{points[np.argmin(length)]}"')
    closed_form = ls.project(points)
    if closed_form is not None:
        return restore(np.asarray(closed_form).reshape(-1, 3), leading)

    projected = _newton_along(ls, points, gradient, tol, max_iterations)
    for _ in range(max_iterations):
        normal, _ = unit_vectors(ls.gradient(projected))
        offset = points - projected
        tangential = offset - np.sum(offset * normal, axis=1)[:, None] * normal
        if np.all(np.linalg.norm(tangential, axis=1) <= tol * (1.0 + np.linalg.norm(offset, axis=1))):
            break
        projected = _newton_along(ls, projected + tangential, None, tol, max_iterations)
    else:
        raise NonConvergence(f'Tangential correction did not converge after {max_iterations} iterations')
    return restore(projected, leading)


def _newton_along(ls: LevelSetField, points: np.ndarray, direction: np.ndarray | None, tol: float,
                  max_iterations: int) -> np.ndarray:
    """
    Solve phi(x - s d) = 0 for s by damped Newton, with d the gradient at x unless given.
    """
    if direction is None:
        direction = ls.gradient(points)
    s = np.zeros(points.shape[0])
    value = ls.evaluate(points)
    for _ in range(max_iterations):
        current = points - s[:, None] * direction
        gradient = ls.gradient(current)
        scale = np.maximum(1.0, np.linalg.norm(gradient, axis=1))
        active = np.abs(value) > tol * scale
        if not np.any(active):
            return current
        slope = -np.sum(gradient * direction, axis=1)
        if np.any(np.abs(slope[active]) < MIN_GRADIENT ** 2):
            raise DegenerateGradient('Newton direction is tangent to the level set')
        step = np.where(active, -value / np.where(active, slope, 1.0), 0.0)
        # Halve the step where it does not reduce |phi|.
        for _ in range(30):
            candidate = s + step
            trial = ls.evaluate(points - candidate[:, None] * direction)
            worse = active & (np.abs(trial) > np.abs(value))
            if not np.any(worse):
                break
            step = np.where(worse, 0.5 * step, step)
        s = s + step
        value = trial
    current = points - s[:, None] * direction
    scale = np.maximum(1.0, np.linalg.norm(ls.gradient(current), axis=1))
    if np.any(np.abs(ls.evaluate(current)) > tol * scale):
        raise NonConvergence(f'Closest-point projection did not converge after {max_iterations} iterations')
    return current
