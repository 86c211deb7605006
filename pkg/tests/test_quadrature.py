from math import factorial

import numpy as np
import pytest

from curveddg.geometry import CurvedMap
from curveddg.mesh import curve_boundary, generate_disk_mesh
from curveddg.quadrature import (MAX_DEGREE, UnsupportedDegreeError, edge_rule, integrate_element,
                                 integrate_face, triangle_rule)
from curveddg.mesh import build_connectivity


def exact_triangle_monomial(a, b):
    # integral of x^a y^b over the reference triangle
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(1, MAX_DEGREE + 1))
def test_triangle_rule_exact_for_monomials(degree):
    rule = triangle_rule(degree)
    assert rule.degree >= degree
    assert np.all(rule.weights > 0)
    x, y = rule.points.T
    assert np.all(x >= 0) and np.all(y >= 0) and np.all(x + y <= 1 + 1e-14)
    for k in range(degree + 1):
        for a in range(k + 1):
            b = k - a
            got = np.sum(rule.weights * x**a * y**b)
            assert abs(got - exact_triangle_monomial(a, b)) <= 1e-13


@pytest.mark.parametrize("degree", [1, 2, 5, 9, 17, 41])
def test_edge_rule_exact(degree):
    rule = edge_rule(degree)
    for k in range(degree + 1):
        assert abs(np.sum(rule.weights * rule.points**k) - 1 / (k + 1)) <= 1e-13


def test_degree_above_limit_is_rejected():
    with pytest.raises(UnsupportedDegreeError):
        triangle_rule(MAX_DEGREE + 1)


def test_small_symmetric_rules_have_expected_sizes():
    assert len(triangle_rule(1)) == 1
    assert len(triangle_rule(2)) == 3
    assert len(triangle_rule(5)) == 7


def test_integrate_element_affine_area():
    cmap = CurvedMap(np.array([[0, 0], [2, 0], [0, 1], [1, 0], [1, 0.5], [0, 0.5]], dtype=float))
    assert integrate_element(lambda x: np.ones(len(x)), cmap, triangle_rule(2)) == pytest.approx(1.0, abs=1e-14)


def test_disk_area_and_circumference():
    mesh = generate_disk_mesh(0.05)
    faces = build_connectivity(mesh)
    maps = curve_boundary(mesh, faces=faces)
    rule = triangle_rule(4)
    DF = maps.jacobians(rule.points)
    det = DF[..., 0, 0] * DF[..., 1, 1] - DF[..., 0, 1] * DF[..., 1, 0]
    area = np.sum(det * rule.weights)
    er = edge_rule(6)
    length = sum(integrate_face(lambda x: np.ones(len(x)), faces[i], maps, er) for i in faces.boundary)
    assert abs(area - np.pi) <= 5e-4
    assert abs(length - 2 * np.pi) <= 5e-4
