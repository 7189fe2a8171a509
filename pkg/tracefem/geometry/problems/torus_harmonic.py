import numpy as np

from tracefem.geometry.level_set import Torus
from tracefem.geometry.problem import SurfaceProblem


class TorusHarmonic(SurfaceProblem):
    """
    -Lap_G u + u = f on the torus R = 1, r = 0.6 with u = sin(3 phi) cos(3 theta + phi), where phi is the
    azimuth around the x3 axis and theta the angle around the core circle.
    """
    problem_id = 'ex2'
    description = 'torus R=1 r=0.6, trigonometric solution'

    major_radius: float = 1.0
    minor_radius: float = 0.6

    def __init__(self, **params):
        super().__init__(**params)
        self.level_set = Torus(self.major_radius, self.minor_radius)

    def _angles(self, p):
        phi = np.arctan2(p[:, 1], p[:, 0])
        theta = np.arctan2(p[:, 2], np.hypot(p[:, 0], p[:, 1]) - self.major_radius)
        return phi, theta

    def _solution_on_surface(self, p):
        phi, theta = self._angles(p)
        return np.sin(3.0 * phi) * np.cos(3.0 * theta + phi)

    def _rhs_on_surface(self, p):
        phi, theta = self._angles(p)
        r, big_r = self.minor_radius, self.major_radius
        ring = big_r + r * np.cos(theta)
        u = np.sin(3.0 * phi) * np.cos(3.0 * theta + phi)
        return (9.0 * u / r ** 2
                - (-10.0 * u - 6.0 * np.cos(3.0 * phi) * np.sin(3.0 * theta + phi)) / ring ** 2
                - 3.0 * np.sin(theta) * np.sin(3.0 * phi) * np.sin(3.0 * theta + phi) / (r * ring)
                + u)
