import numpy as np

from tracefem.errors import ConfigError
from tracefem.geometry.level_set import Sphere
from tracefem.geometry.problem import SurfaceProblem


class InteriorLayer(SurfaceProblem):
    """
    Advection-dominated problem on the unit sphere: -eps Lap_G u + w . grad_G u + u = f with the rotating
    field w = (-x2 sqrt(1 - x3^2), x1 sqrt(1 - x3^2), 0) and u = x1 x2 arctan(2 x3 / sqrt(eps)), which has an
    interior layer of width sqrt(eps) along the equator.
    """
    problem_id = 'ex6'
    description = 'unit sphere, equatorial interior layer'
    has_velocity = True

    def __init__(self, eps: float | None = None, **params):
        super().__init__(**params)
        eps = 1e-4 if eps is None else float(eps)
        if not 1e-6 <= eps <= 1.0:
            raise ConfigError(f'eps must lie in [1e-6, 1] : "{eps}"')
        self.eps = eps
        self.level_set = Sphere(1.0)

    def _velocity_on_surface(self, p):
        swirl = np.sqrt(np.clip(1.0 - p[:, 2] ** 2, 0.0, None))
        return np.stack([-p[:, 1] * swirl, p[:, 0] * swirl, np.zeros(p.shape[0])], axis=1)

    def _velocity_jacobian_on_surface(self, p):
        x1, x2, x3 = p[:, 0], p[:, 1], p[:, 2]
        swirl = np.sqrt(np.clip(1.0 - x3 ** 2, 0.0, None))
        # d swirl / d x3 = -x3 / swirl, set to zero at the poles where w vanishes
        tilt = np.where(swirl > 0.0, x3 / np.where(swirl > 0.0, swirl, 1.0), 0.0)
        jacobian = np.zeros((p.shape[0], 3, 3))
        jacobian[:, 0, 1] = -swirl
        jacobian[:, 0, 2] = x2 * tilt
        jacobian[:, 1, 0] = swirl
        jacobian[:, 1, 2] = -x1 * tilt
        return jacobian

    def _solution_on_surface(self, p):
        return p[:, 0] * p[:, 1] * np.arctan(2.0 * p[:, 2] / np.sqrt(self.eps))

    def _rhs_on_surface(self, p):
        eps = self.eps
        x1, x2, x3 = p[:, 0], p[:, 1], p[:, 2]
        layer = eps + 4.0 * x3 ** 2
        angle = np.arctan(2.0 * x3 / np.sqrt(eps))
        return (12.0 * eps ** 1.5 * x1 * x2 * x3 / layer
                + 16.0 * eps ** 1.5 * (1.0 - x3 ** 2) * x1 * x2 * x3 / layer ** 2
                + (6.0 * eps * x1 * x2 + np.hypot(x1, x2) * (x1 ** 2 - x2 ** 2)) * angle
                + x1 * x2 * angle)

    def _surface_gradient_on_surface(self, p):
        x1, x2, x3 = p[:, 0], p[:, 1], p[:, 2]
        angle = np.arctan(2.0 * x3 / np.sqrt(self.eps))
        slope = 2.0 * np.sqrt(self.eps) / (self.eps + 4.0 * x3 ** 2)
        return np.stack([x2 * angle, x1 * angle, x1 * x2 * slope], axis=1)
