"""
This module contains the abstract class LevelSetField and the implicit surfaces used by the builtin problems.
All evaluations accept a point of shape (3,) or an array of points of shape (..., 3).
"""
from abc import abstractmethod

import numpy as np

from tracefem.utils import as_points, restore, unit_vectors


class LevelSetField:
    """
    Abstract implicit surface description: the surface is the zero set of evaluate, negative inside.
    """

    # Short identifier used in reports.
    name: str = 'level_set'
    # True when the field is the exact signed distance to its zero set (|gradient| = 1 in the band).
    is_distance: bool = False

    def evaluate(self, x) -> np.ndarray:
        points, leading = as_points(x)
        return restore(self._evaluate(points), leading)

    def gradient(self, x) -> np.ndarray:
        points, leading = as_points(x)
        return restore(self._gradient(points), leading)

    def hessian(self, x) -> np.ndarray:
        points, leading = as_points(x)
        return restore(self._hessian(points), leading)

    def project(self, x) -> np.ndarray | None:
        """
        Closed-form closest point on the zero set, available for exact distance fields only.
        Args:
            x: The points to project.
        returns:
            The projected points, or None when no closed form exists.
        """
        if not self.is_distance:
            return None
        points, leading = as_points(x)
        value = self._evaluate(points)
        normal, _ = unit_vectors(self._gradient(points))
        return restore(points - value[:, None] * normal, leading)

    @abstractmethod
    def _evaluate(self, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _gradient(self, x: np.ndarray) -> np.ndarray:
        pass

    @abstractmethod
    def _hessian(self, x: np.ndarray) -> np.ndarray:
        pass

    def __str__(self):
        return self.name


class Sphere(LevelSetField):
    """
    Signed distance to a sphere.
    """
    name = 'sphere'
    is_distance = True

    def __init__(self, radius: float = 1.0, center=(0.0, 0.0, 0.0)):
        self.radius = float(radius)
        self.center = np.asarray(center, dtype=float)

    def _evaluate(self, x):
        return np.linalg.norm(x - self.center, axis=1) - self.radius

    def _gradient(self, x):
        normal, _ = unit_vectors(x - self.center)
        return normal

    def _hessian(self, x):
        normal, length = unit_vectors(x - self.center)
        length = np.where(length > 0.0, length, np.inf)
        tangential = np.eye(3) - normal[:, :, None] * normal[:, None, :]
        return tangential / length[:, None, None]

    def project(self, x):
        points, leading = as_points(x)
        normal, _ = unit_vectors(points - self.center)
        return restore(self.center + self.radius * normal, leading)


class Torus(LevelSetField):
    """
    Signed distance to a torus around the x3 axis with major radius R and minor radius r.
    """
    name = 'torus'
    is_distance = True

    def __init__(self, major_radius: float = 1.0, minor_radius: float = 0.6):
        self.major_radius = float(major_radius)
        self.minor_radius = float(minor_radius)

    def _frame(self, x):
        rho = np.hypot(x[:, 0], x[:, 1])
        safe_rho = np.where(rho > 0.0, rho, 1.0)
        radial = np.stack([x[:, 0] / safe_rho, x[:, 1] / safe_rho, np.zeros_like(rho)], axis=1)
        # Points on the axis have no radial direction; pick e1.
        radial[rho == 0.0] = (1.0, 0.0, 0.0)
        core = self.major_radius * radial
        return rho, radial, core

    def _evaluate(self, x):
        _, _, core = self._frame(x)
        return np.linalg.norm(x - core, axis=1) - self.minor_radius

    def _gradient(self, x):
        _, _, core = self._frame(x)
        normal, _ = unit_vectors(x - core)
        return normal

    def _hessian(self, x):
        rho, radial, core = self._frame(x)
        normal, distance = unit_vectors(x - core)
        distance = np.where(distance > 0.0, distance, np.inf)
        azimuthal = np.stack([-radial[:, 1], radial[:, 0], np.zeros_like(rho)], axis=1)
        safe_rho = np.where(rho > 0.0, rho, np.inf)
        hessian = np.eye(3) - normal[:, :, None] * normal[:, None, :]
        hessian -= (self.major_radius / safe_rho)[:, None, None] * azimuthal[:, :, None] * azimuthal[:, None, :]
        return hessian / distance[:, None, None]

    def project(self, x):
        points, leading = as_points(x)
        _, _, core = self._frame(points)
        normal, _ = unit_vectors(points - core)
        return restore(core + self.minor_radius * normal, leading)


class Plane(LevelSetField):
    """
    Signed distance to the plane normal . x = offset.
    """
    name = 'plane'
    is_distance = True

    def __init__(self, normal=(0.0, 0.0, 1.0), offset: float = 0.0):
        normal = np.asarray(normal, dtype=float)
        length = np.linalg.norm(normal)
        self.normal = normal / length
        self.offset = float(offset) / length

    def _evaluate(self, x):
        return x @ self.normal - self.offset

    def _gradient(self, x):
        return np.broadcast_to(self.normal, x.shape).copy()

    def _hessian(self, x):
        return np.zeros((x.shape[0], 3, 3))


class WavyCigar(LevelSetField):
    """
    Elongated surface x1^2/4 + x2^2 + 4 x3^2 / (1 + sin(pi x1)/2)^2 = 1 with a wavy cross-section.
    """
    name = 'wavy_cigar'

    @staticmethod
    def _profile(x1):
        g = 1.0 + 0.5 * np.sin(np.pi * x1)
        dg = 0.5 * np.pi * np.cos(np.pi * x1)
        ddg = -0.5 * np.pi ** 2 * np.sin(np.pi * x1)
        return g, dg, ddg

    def _evaluate(self, x):
        g, _, _ = self._profile(x[:, 0])
        return x[:, 0] ** 2 / 4.0 + x[:, 1] ** 2 + 4.0 * x[:, 2] ** 2 / g ** 2 - 1.0

    def _gradient(self, x):
        g, dg, _ = self._profile(x[:, 0])
        x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
        return np.stack([
            x1 / 2.0 - 8.0 * x3 ** 2 * dg / g ** 3,
            2.0 * x2,
            8.0 * x3 / g ** 2,
        ], axis=1)

    def _hessian(self, x):
        g, dg, ddg = self._profile(x[:, 0])
        x3 = x[:, 2]
        hessian = np.zeros((x.shape[0], 3, 3))
        hessian[:, 0, 0] = 0.5 - 8.0 * x3 ** 2 * (ddg / g ** 3 - 3.0 * dg ** 2 / g ** 4)
        hessian[:, 1, 1] = 2.0
        hessian[:, 2, 2] = 8.0 / g ** 2
        hessian[:, 0, 2] = hessian[:, 2, 0] = -16.0 * x3 * dg / g ** 3
        return hessian


class SixHandleSurface(LevelSetField):
    """
    Quartic surface with six handles, symmetric under axis permutations and reflections:
    sum over axis pairs of (xi^2 + xj^2 - 4)^2 plus sum over axes of (xi^2 - 1)^2, minus 13.
    """
    name = 'six_handles'

    def _evaluate(self, x):
        s = x ** 2
        return ((s[:, 0] + s[:, 1] - 4.0) ** 2 + (s[:, 1] - 1.0) ** 2 + (s[:, 1] + s[:, 2] - 4.0) ** 2
                + (s[:, 0] - 1.0) ** 2 + (s[:, 0] + s[:, 2] - 4.0) ** 2 + (s[:, 2] - 1.0) ** 2 - 13.0)

    @staticmethod
    def _slopes(x):
        # d phi / d xi = 4 xi (2 xi^2 + |x|^2 - 9)
        return 2.0 * x ** 2 + np.sum(x ** 2, axis=1, keepdims=True) - 9.0

    def _gradient(self, x):
        return 4.0 * x * self._slopes(x)

    def _hessian(self, x):
        hessian = 8.0 * x[:, :, None] * x[:, None, :]
        diagonal = 4.0 * self._slopes(x) + 24.0 * x ** 2
        hessian[:, [0, 1, 2], [0, 1, 2]] = diagonal
        return hessian


class ExpressionField(LevelSetField):
    """
    Level set given by a closed-form expression in x1, x2, x3 using numpy functions, for instance
    'x1**2 + x2**2 + x3**2 - 1'. Derivatives are central differences.
    """
    name = 'expression'

    # Finite-difference step of the derivatives.
    step: float = 1e-5

    def __init__(self, expression: str):
        self.expression = expression
        self.code = compile(expression, '<level set>', 'eval')
        self.namespace = {k: getattr(np, k) for k in ('sin', 'cos', 'tan', 'exp', 'log', 'sqrt', 'abs',
                                                      'arctan', 'arctan2', 'sinh', 'cosh', 'tanh', 'pi')}

    def _evaluate(self, x):
        scope = dict(self.namespace, x1=x[:, 0], x2=x[:, 1], x3=x[:, 2])
        return np.broadcast_to(np.asarray(eval(self.code, {'__builtins__': {}}, scope), dtype=float),
                               (x.shape[0],)).copy()

    def _gradient(self, x):
        gradient = np.empty_like(x)
        for axis in range(3):
            offset = np.zeros(3)
            offset[axis] = self.step
            gradient[:, axis] = (self._evaluate(x + offset) - self._evaluate(x - offset)) / (2.0 * self.step)
        return gradient

    def _hessian(self, x):
        hessian = np.empty((x.shape[0], 3, 3))
        for axis in range(3):
            offset = np.zeros(3)
            offset[axis] = self.step
            hessian[:, :, axis] = (self._gradient(x + offset) - self._gradient(x - offset)) / (2.0 * self.step)
        return 0.5 * (hessian + np.transpose(hessian, (0, 2, 1)))
