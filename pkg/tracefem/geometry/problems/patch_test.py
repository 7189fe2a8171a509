import numpy as np

from tracefem.errors import ConfigError
from tracefem.geometry.level_set import Sphere, Torus, WavyCigar, SixHandleSurface
from tracefem.geometry.problem import SurfaceProblem

# Surfaces available to the patch test: (level set factory, bulk box).
surfaces = {
    'sphere': (lambda: Sphere(1.0), (-2.0, 2.0)),
    'torus': (lambda: Torus(1.0, 0.6), (-2.0, 2.0)),
    'wavy_cigar': (WavyCigar, (-3.0, 3.0)),
    'six_handles': (SixHandleSurface, (-3.0, 3.0)),
}


class PatchTest(SurfaceProblem):
    """
    -Lap_G u + u = 1 with exact solution u = 1 on any surface. The discrete solution is exactly one.
    """
    problem_id = 'patch'
    description = 'constant solution'

    def __init__(self, surface: str = 'sphere', **params):
        super().__init__(**params)
        if surface not in surfaces:
            raise ConfigError(f'Unknown patch test surface : "{surface}"')
        factory, self.box = surfaces[surface]
        self.level_set = factory()
        self.description = f'constant solution on {surface}'

    def _rhs_on_surface(self, p):
        return np.ones(p.shape[0])

    def _solution_on_surface(self, p):
        return np.ones(p.shape[0])

    def _surface_gradient_on_surface(self, p):
        return np.zeros_like(p)
