from tracefem.geometry.differential import normal_hessian
from tracefem.geometry.level_set import WavyCigar
from tracefem.geometry.problem import SurfaceProblem


class WavyCigarProblem(SurfaceProblem):
    """
    -Lap_G u + u = f on the wavy cigar with u = x1 x2; f involves the curvature trace tr(H).
    """
    problem_id = 'ex3'
    description = 'wavy cigar, u = x1 x2'
    box = (-3.0, 3.0)

    def __init__(self, **params):
        super().__init__(**params)
        self.level_set = WavyCigar()

    def _solution_on_surface(self, p):
        return p[:, 0] * p[:, 1]

    def _rhs_on_surface(self, p):
        data = normal_hessian(self.level_set, p)
        n = data.unit_normal
        x1, x2 = p[:, 0], p[:, 1]
        return x1 * x2 + 2.0 * n[:, 0] * n[:, 1] + data.mean_curvature_trace * (x1 * n[:, 1] + x2 * n[:, 0])

    def _surface_gradient_on_surface(self, p):
        gradient = p.copy()
        gradient[:, 0], gradient[:, 1], gradient[:, 2] = p[:, 1], p[:, 0], 0.0
        return gradient
