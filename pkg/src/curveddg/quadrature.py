"""Quadrature rules on the reference triangle and the unit interval."""

from dataclasses import dataclass
from math import ceil, sqrt

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy.special import roots_jacobi

MAX_DEGREE = 20


class UnsupportedDegreeError(ValueError):
    pass


@dataclass(frozen=True)
class QuadRule:
    """Points and weights of a positive rule.

    Triangle rules live on {x, y >= 0, x + y <= 1} and their weights sum to
    1/2; edge rules live on [0, 1] and their weights sum to 1.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


def _orbit(a, b, c):
    # all distinct permutations of a barycentric triple, as (x, y) = (l1, l2)
    perms = {(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)}
    return [(p[1], p[2]) for p in sorted(perms)]


def _symmetric_rule(degree):
    if degree <= 1:
        return np.array([[1 / 3, 1 / 3]]), np.array([0.5]), 1
    if degree == 2:
        pts = np.array([[1 / 6, 1 / 6], [2 / 3, 1 / 6], [1 / 6, 2 / 3]])
        return pts, np.full(3, 1 / 6), 2
    # Radon's 7-point rule, exact to degree 5
    s = sqrt(15.0)
    a1, w1 = (6 - s) / 21, (155 - s) / 1200
    a2, w2 = (6 + s) / 21, (155 + s) / 1200
    pts = [(1 / 3, 1 / 3)]
    wts = [9 / 40]
    for a, w in ((a1, w1), (a2, w2)):
        orb = _orbit(a, a, 1 - 2 * a)
        pts += orb
        wts += [w] * len(orb)
    return np.array(pts), 0.5 * np.array(wts), 5


def _collapsed_rule(degree):
    n = max(1, ceil((degree + 1) / 2))
    t, wt = leggauss(n)
    t = 0.5 * (t + 1.0)
    wt = 0.5 * wt
    # Gauss-Jacobi (alpha=1) absorbs the (1 - s) Jacobian of the collapse
    s, ws = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (s + 1.0)
    ws = ws / 4.0
    S, T = np.meshgrid(s, t, indexing="ij")
    WS, WT = np.meshgrid(ws, wt, indexing="ij")
    x = S.ravel()
    y = ((1.0 - S) * T).ravel()
    return np.column_stack([x, y]), (WS * WT).ravel(), 2 * n - 1


def triangle_rule(degree):
    """Positive rule on the reference triangle exact for polynomials of ``degree``."""
    degree = int(degree)
    if degree < 1:
        degree = 1
    if degree > MAX_DEGREE:
        raise UnsupportedDegreeError(f"triangle rules are available up to degree {MAX_DEGREE}, got {degree}")
    if degree <= 5:
        pts, wts, exact = _symmetric_rule(degree)
    else:
        pts, wts, exact = _collapsed_rule(degree)
    return QuadRule(pts, wts, exact)


def edge_rule(degree):
    """Gauss-Legendre rule on [0, 1] exact to ``degree``."""
    degree = max(int(degree), 1)
    if degree > 2 * MAX_DEGREE + 1:
        raise UnsupportedDegreeError(f"edge rule degree {degree} too large")
    n = ceil((degree + 1) / 2)
    t, w = leggauss(n)
    return QuadRule(0.5 * (t + 1.0), 0.5 * w, 2 * n - 1)


def integrate_element(f, cmap, rule):
    """Integrate a function of physical points over one curved element.

    ``f`` takes an ``(n, 2)`` array of physical points; ``cmap`` is a
    :class:`curveddg.geometry.CurvedMap`.
    """
    x = cmap.map_point(rule.points)
    det = cmap.jacobian_det(rule.points)
    return float(np.sum(rule.weights * np.asarray(f(x)) * det))


def integrate_face(g, face, maps, rule):
    """Integrate a function of physical points along a (possibly curved) face."""
    from .geometry import face_points_and_metric

    x, metric = face_points_and_metric(face, maps, rule.points)
    return float(np.sum(rule.weights * np.asarray(g(x)) * metric))
