import numpy as np

from tracefem.geometry.level_set import SixHandleSurface
from tracefem.geometry.problem import SurfaceProblem


class SixHandlesProblem(SurfaceProblem):
    """
    Pure Laplace-Beltrami problem -Lap_G u = f on the six-handle surface with four Gaussian sources
    f = 100 sum_j exp(-|x - x_j|^2); closed by the zero-mean condition. No exact solution.
    """
    problem_id = 'ex4'
    description = 'six-handle surface, four Gaussian sources'
    box = (-3.0, 3.0)
    zero_mean_mode = True
    has_exact_solution = False

    # Source amplitude.
    amplitude: float = 100.0

    def __init__(self, alternate_spot: bool = False, **params):
        super().__init__(**params)
        self.level_set = SixHandleSurface()
        fourth = (-1.0, -1.0, -2.04) if alternate_spot else (0.0, -1.0, -2.04)
        self.spots = np.array([(-1.0, 1.0, 2.04), (1.0, 2.04, 1.0), (2.04, 0.0, 1.0), fourth])

    def _reaction_on_surface(self, p):
        return np.zeros(p.shape[0])

    def _rhs_on_surface(self, p):
        distances = np.sum((p[:, None, :] - self.spots[None, :, :]) ** 2, axis=2)
        return self.amplitude * np.sum(np.exp(-distances), axis=1)
