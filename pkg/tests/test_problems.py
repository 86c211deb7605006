import numpy as np
import pytest

from curveddg.problems import BIHARMONIC_SOLUTION, POISSON_SOLUTION, PolynomialFunction


def five_point_laplacian(f, x, h):
    e = np.eye(2) * h
    return (f(x + e[0]) + f(x - e[0]) + f(x + e[1]) + f(x - e[1]) - 4 * f(x)) / h**2


@pytest.fixture
def points():
    rng = np.random.default_rng(3)
    r = np.sqrt(rng.uniform(0, 1, 20))
    a = rng.uniform(0, 2 * np.pi, 20)
    return np.column_stack([r * np.cos(a), r * np.sin(a)])


def test_poisson_rhs_matches_finite_difference_laplacian(points):
    u = POISSON_SOLUTION
    fd = -five_point_laplacian(u.value, points, 5e-5)
    assert np.max(np.abs(fd - u.rhs(points))) <= 1e-6


def test_biharmonic_rhs_matches_finite_difference_of_laplacian(points):
    u = BIHARMONIC_SOLUTION
    fd = five_point_laplacian(u.laplacian, points, 1e-4)
    f = u.rhs(points)
    assert np.max(np.abs(fd - f)) <= 1e-6 * np.max(np.abs(f))


def test_rhs_symbolically():
    sympy = pytest.importorskip("sympy")
    x, y = sympy.symbols("x y", real=True)
    s = x**2 + y**2
    lap = lambda w: sympy.diff(w, x, 2) + sympy.diff(w, y, 2)  # noqa: E731
    cases = [(sympy.sin(sympy.pi * s) / 4, POISSON_SOLUTION, -1),
             (sympy.sin(sympy.pi * s) ** 2, BIHARMONIC_SOLUTION, 2)]
    pts = np.array([[0.3, -0.2], [0.7, 0.1], [-0.5, -0.6]])
    for expr, u, kind in cases:
        f = -lap(expr) if kind == -1 else lap(lap(expr))
        fn = sympy.lambdify((x, y), f, "numpy")
        assert np.allclose(fn(pts[:, 0], pts[:, 1]), u.rhs(pts), rtol=1e-12, atol=1e-10)


@pytest.mark.parametrize("u", [POISSON_SOLUTION, BIHARMONIC_SOLUTION,
                               PolynomialFunction({(3, 1): 2.0, (0, 4): -1.0, (2, 0): 0.5, (0, 0): 1.0})])
def test_derivatives_match_finite_differences(u, points):
    h = 1e-5
    e = np.eye(2)
    for lower, upper in ((u.value, u.grad), (u.grad, u.hess), (u.hess, u.third)):
        fd = np.stack([(lower(points + h * e[j]) - lower(points - h * e[j])) / (2 * h) for j in range(2)], axis=-1)
        ex = upper(points)
        assert np.max(np.abs(fd - ex)) <= 1e-6 * max(1.0, np.max(np.abs(ex)))


def test_exact_solutions_satisfy_boundary_conditions():
    a = np.linspace(0, 2 * np.pi, 13)
    x = np.column_stack([np.cos(a), np.sin(a)])
    assert np.max(np.abs(POISSON_SOLUTION.value(x))) <= 1e-15
    assert np.max(np.abs(BIHARMONIC_SOLUTION.value(x))) <= 1e-15
    assert np.max(np.abs(BIHARMONIC_SOLUTION.grad(x))) <= 1e-14
