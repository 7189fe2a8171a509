import numpy as np
import pytest

from tracefem.errors import UnsupportedQuadratureDegree
from tracefem.fem.quadrature import MAX_DEGREE, triangle_rule, oracle_rule, line_rule, collapsed_gauss


@pytest.mark.parametrize('degree', range(1, MAX_DEGREE + 1))
def test_triangle_rule_integrates_monomials(degree):
    rule = triangle_rule(degree)
    assert rule.weights.sum() == pytest.approx(1.0)
    np.testing.assert_allclose(rule.points.sum(axis=1), 1.0)
    for total in range(degree + 1):
        for a in range(total + 1):
            assert rule.monomial_error(a, total - a) <= 1e-12


def test_symmetric_rule_sizes():
    assert [len(triangle_rule(degree)) for degree in (1, 2, 4, 5)] == [1, 3, 6, 7]


def test_unsupported_degree():
    with pytest.raises(UnsupportedQuadratureDegree):
        triangle_rule(0)
    with pytest.raises(UnsupportedQuadratureDegree):
        triangle_rule(MAX_DEGREE + 1)


def test_oracle_rule():
    rule = oracle_rule()
    assert len(rule) == 64
    assert rule.monomial_error(7, 7) <= 1e-14
    assert collapsed_gauss(3).degree == 4


def test_physical_points():
    corners = np.array([[[0.0, 0.0, 0.0], [2.0, 0.0, 0.0], [0.0, 2.0, 0.0]]])
    points = triangle_rule(1).physical_points(corners)
    np.testing.assert_allclose(points, [[[2.0 / 3.0, 2.0 / 3.0, 0.0]]])


def test_line_rule():
    nodes, weights = line_rule(3)
    assert weights.sum() == pytest.approx(1.0)
    assert np.sum(weights * nodes ** 5) == pytest.approx(1.0 / 6.0)
    assert np.all((nodes > 0.0) & (nodes < 1.0))
