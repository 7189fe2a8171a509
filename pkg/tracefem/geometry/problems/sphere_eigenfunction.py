import numpy as np

from tracefem.geometry.level_set import Sphere
from tracefem.geometry.problem import SurfaceProblem


class SphereEigenfunction(SurfaceProblem):
    """
    -Lap_G u + u = f on the unit sphere with the degree-3 spherical harmonic u = a (3 x1^2 x2 - x2^3) / |x|^3.
    """
    problem_id = 'ex1'
    description = 'unit sphere, spherical harmonic of degree 3'

    # Amplitude of the harmonic.
    amplitude: float = 12.0

    def __init__(self, **params):
        super().__init__(**params)
        self.level_set = Sphere(1.0)

    def _harmonic(self, p):
        x1, x2 = p[:, 0], p[:, 1]
        return self.amplitude * (3.0 * x1 ** 2 * x2 - x2 ** 3) / np.linalg.norm(p, axis=1) ** 3

    def _solution_on_surface(self, p):
        return self._harmonic(p)

    def _rhs_on_surface(self, p):
        # -Lap_G of a degree-3 harmonic is 12 u.
        return 13.0 * self._harmonic(p)

    def _surface_gradient_on_surface(self, p):
        x1, x2 = p[:, 0], p[:, 1]
        return self.amplitude * np.stack([6.0 * x1 * x2, 3.0 * x1 ** 2 - 3.0 * x2 ** 2, np.zeros_like(x1)], axis=1)
