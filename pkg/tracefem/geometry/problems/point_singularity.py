import numpy as np

from tracefem.errors import ConfigError
from tracefem.geometry.level_set import Sphere
from tracefem.geometry.problem import SurfaceProblem


class PointSingularity(SurfaceProblem):
    """
    -Lap_G u + u = f on the unit sphere with u = sin^lam(theta) sin(phi), singular at the poles for lam < 1.
    On the unit sphere sin(theta) = sqrt(x1^2 + x2^2) and u = x2 sin^(lam - 1)(theta).
    """
    problem_id = 'ex5'
    description = 'unit sphere, pole singularities'

    def __init__(self, lam: float = 0.6, **params):
        super().__init__(**params)
        if not 0.0 < lam <= 1.0:
            raise ConfigError(f'lambda must lie in (0, 1] : "{lam}"')
        self.lam = float(lam)
        self.level_set = Sphere(1.0)

    @staticmethod
    def _power(s, exponent):
        safe = np.where(s > 0.0, s, 1.0)
        return np.where(s > 0.0, safe ** exponent, 0.0)

    def _solution_on_surface(self, p):
        s = np.hypot(p[:, 0], p[:, 1])
        return p[:, 1] * self._power(s, self.lam - 1.0)

    def _rhs_on_surface(self, p):
        lam = self.lam
        s = np.hypot(p[:, 0], p[:, 1])
        u = p[:, 1] * self._power(s, lam - 1.0)
        return (1.0 + lam + lam ** 2) * u + (1.0 - lam ** 2) * p[:, 1] * self._power(s, lam - 3.0)

    def _surface_gradient_on_surface(self, p):
        lam = self.lam
        x1, x2 = p[:, 0], p[:, 1]
        s = np.hypot(x1, x2)
        low = self._power(s, lam - 3.0)
        return np.stack([(lam - 1.0) * x1 * x2 * low,
                         self._power(s, lam - 1.0) + (lam - 1.0) * x2 ** 2 * low,
                         np.zeros_like(x1)], axis=1)
