"""
This module contains the quadrature rules on the reference triangle and on the unit interval.
Triangle rules are given in barycentric coordinates with weights summing to 1, so that the integral over a
triangle T is area(T) * sum(w_q f(x_q)).
"""
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from tracefem.errors import UnsupportedQuadratureDegree

# Highest degree accepted by the configuration.
MAX_DEGREE = 7


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """
    Barycentric points (q, 3) and weights (q,) of a triangle rule of the given exactness degree.
    """
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)

    def physical_points(self, corners: np.ndarray) -> np.ndarray:
        """
        Map the rule to triangles.
        Args:
            corners: Triangle vertices, shape (n, 3, 3).
        returns:
            The quadrature points, shape (n, q, 3).
        """
        return np.einsum('qa,nad->nqd', self.points, corners)

    def monomial_error(self, a: int, b: int) -> float:
        """
        Error of the rule on x^a y^b against the exact reference-triangle mean 2 a! b! / (a + b + 2)!.
        """
        x, y = self.points[:, 1], self.points[:, 2]
        exact = 2.0 * math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
        return abs(float(np.sum(self.weights * x ** a * y ** b)) - exact)


def _orbit(weight: float, a: float, b: float) -> list[tuple[float, tuple[float, float, float]]]:
    return [(weight, (a, b, b)), (weight, (b, a, b)), (weight, (b, b, a))]


# Symmetric rules (Strang-Fix and Dunavant), weights normalized to 1.
_SYMMETRIC = {
    1: [(1.0, (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0))],
    2: _orbit(1.0 / 3.0, 2.0 / 3.0, 1.0 / 6.0),
    4: _orbit(0.223381589678011, 0.108103018168070, 0.445948490915965)
       + _orbit(0.109951743655322, 0.816847572980459, 0.091576213509771),
    5: [(0.225, (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0))]
       + _orbit(0.132394152788506, 0.059715871789770, 0.470142064105115)
       + _orbit(0.125939180544827, 0.797426985353087, 0.101286507323456),
}


def collapsed_gauss(n: int) -> QuadratureRule:
    """
    Tensor Gauss-Legendre rule with n x n points mapped onto the triangle by the collapsing map
    (u, v) -> (u, v (1 - u)); exact for degree 2n - 2.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n)
    nodes = 0.5 * (nodes + 1.0)
    weights = 0.5 * weights
    u, v = np.meshgrid(nodes, nodes, indexing='ij')
    wu, wv = np.meshgrid(weights, weights, indexing='ij')
    x = u.ravel()
    y = (v * (1.0 - u)).ravel()
    w = (wu * wv * (1.0 - u)).ravel()
    points = np.stack([1.0 - x - y, x, y], axis=1)
    return QuadratureRule(points, w / w.sum(), 2 * n - 2)


@lru_cache(maxsize=None)
def triangle_rule(degree: int) -> QuadratureRule:
    """
    The triangle rule of the given exactness degree (1 to 7).
    Degrees 1, 2, 4 and 5 use symmetric rules with 1, 3, 6 and 7 points, the others collapsed Gauss rules.
    """
    if not 1 <= degree <= MAX_DEGREE:
        raise UnsupportedQuadratureDegree(f'Unsupported quadrature degree : "{degree}"')
    if degree in _SYMMETRIC:
        weights, points = zip(*_SYMMETRIC[degree])
        weights = np.array(weights)
        return QuadratureRule(np.array(points), weights / weights.sum(), degree)
    return collapsed_gauss(math.ceil((degree + 2) / 2))


def oracle_rule() -> QuadratureRule:
    """
    The dense 64-point rule used to cross-check assembled quantities.
    """
    return collapsed_gauss(8)


@lru_cache(maxsize=None)
def line_rule(n: int = 3) -> tuple[np.ndarray, np.ndarray]:
    """
    Gauss-Legendre points on [0, 1] and weights summing to 1.
    """
    nodes, weights = np.polynomial.legendre.leggauss(n)
    return 0.5 * (nodes + 1.0), 0.5 * weights
