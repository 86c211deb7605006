import warnings

import numpy as np
import pytest
import scipy.linalg as sla

from curveddg.assembly import (Discretization, ParameterError, PenaltyConfig, assemble_biharmonic,
                               assemble_poisson, boundary_remainder, c_form_local, element_pairings, eval_form_C,
                               norm_matrix, penalty_matrix)
from curveddg.mesh import generate_disk_mesh
from curveddg.problems import BIHARMONIC_SOLUTION, PolynomialFunction

from conftest import square_mesh


def quiet_biharmonic(*args, **kwargs):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return assemble_biharmonic(*args, **kwargs)


def test_penalty_defaults():
    assert PenaltyConfig.reference(2) == PenaltyConfig(160.0, 0.1 * 64, 0.1 * 16, 0.1 * 16)
    assert PenaltyConfig.reference(3) == PenaltyConfig(810.0, 7290.0, 810.0, 810.0)
    assert PenaltyConfig.default(3) == PenaltyConfig.reference(3)
    assert PenaltyConfig.default(2).eta2 == pytest.approx(0.5 * 64)
    assert PenaltyConfig(eta1=5.0).resolved(2).eta1 == 5.0
    assert PenaltyConfig(eta1=5.0).resolved(2).eta2 == PenaltyConfig.default(2).eta2
    with pytest.raises(ParameterError):
        PenaltyConfig(eta1=-1.0)
    with pytest.raises(ParameterError):
        PenaltyConfig(eta3=0.0)


@pytest.mark.parametrize("p", [1, 2, 3])
def test_poisson_matrix_symmetric(coarse_mesh, p):
    S = assemble_poisson(Discretization(coarse_mesh, p))
    assert S.asymmetry() <= 1e-12
    assert S.n_dofs == coarse_mesh.n_elements * (p + 1) * (p + 2) // 2
    assert np.array_equal(S.row_offsets, S.matrix.indptr)


@pytest.mark.parametrize("p", [2, 3, 4])
def test_biharmonic_matrix_symmetric(coarse_mesh, p):
    assert quiet_biharmonic(Discretization(coarse_mesh, p)).asymmetry() <= 1e-12


def test_biharmonic_degree_checks(coarse_mesh):
    with pytest.raises(ParameterError):
        assemble_biharmonic(Discretization(coarse_mesh, 1))
    with pytest.warns(UserWarning):
        assemble_biharmonic(Discretization(coarse_mesh, 2))


def test_load_vector_integrates_constants(coarse_mesh):
    d = Discretization(coarse_mesh, 2)
    b = d.load_vector(lambda x: np.ones(x.shape[:-1]))
    assert b.sum() == pytest.approx(np.pi, abs=2e-2)  # area of the curved polygon
    M = d.element_matrix("mass")
    assert M.sum() == pytest.approx(b.sum(), rel=1e-13)


def test_poisson_reproduces_polynomial_solution_on_square():
    d = Discretization(square_mesh(3), 4, curved=False)
    u = PolynomialFunction({(0, 0): 1.0, (2, 0): -1.0, (0, 2): -1.0, (2, 2): 1.0})
    f = lambda x: -u.laplacian(x)  # noqa: E731
    S = assemble_poisson(d, f=f)
    coef = np.linalg.solve(S.matrix.toarray(), S.rhs)
    phys, _ = d.element_table
    uh = np.einsum("eqn,en->eq", phys.values, coef.reshape(d.space.n_elements, -1))
    assert np.max(np.abs(uh - u.value(d.element_points))) <= 1e-11


def _plate_polynomial():
    # (1 - x^2)^2 (1 - y^2)^2
    a = {0: 1.0, 2: -2.0, 4: 1.0}
    return PolynomialFunction({(i, j): ci * cj for i, ci in a.items() for j, cj in a.items()})


def test_biharmonic_reproduces_polynomial_solution_on_square():
    d = Discretization(square_mesh(2), 8, curved=False)
    u = _plate_polynomial()

    def f(x):
        X, Y = x[..., 0], x[..., 1]
        return 24 * (1 - Y**2) ** 2 + 24 * (1 - X**2) ** 2 + 2 * (12 * X**2 - 4) * (12 * Y**2 - 4)

    S = assemble_biharmonic(d, f=f)
    coef = sla.solve(S.matrix.toarray(), S.rhs, assume_a="sym")
    phys, _ = d.element_table
    uh = np.einsum("eqn,en->eq", phys.values, coef.reshape(d.space.n_elements, -1))
    # degree 8 with h^-3 penalties gives cond(A) near 1e9, so rounding sets the scale
    cond = np.linalg.cond(S.matrix.toarray())
    assert np.max(np.abs(uh - u.value(d.element_points))) <= 1e-16 * cond * 100


def test_c_form_matrix_matches_direct_evaluation(medium_mesh, rng):
    d = Discretization(medium_mesh, 3)
    data = d.interior_faces
    Cm = d.assemble([(d.face_dofs(data), c_form_local(data))])
    u, v = rng.uniform(-1, 1, (2, d.n_dofs))
    assert eval_form_C(d, u, v) == pytest.approx(v @ (Cm @ u), rel=1e-12)
    assert eval_form_C(d, BIHARMONIC_SOLUTION, BIHARMONIC_SOLUTION) == 0.0


def test_consistency_identity_exact_on_polygon(rng):
    d = Discretization(square_mesh(3), 3, curved=False)
    w = PolynomialFunction({(4, 0): 1.0, (0, 4): 1.0, (2, 2): 2.0, (2, 0): -2.0, (0, 2): -2.0, (0, 0): 1.0})
    for _ in range(5):
        v = rng.uniform(-1, 1, d.n_dofs)
        lap, hess = element_pairings(d, w, v)
        resid = lap - hess - eval_form_C(d, w, v) + boundary_remainder(d, w, v)
        assert abs(resid) <= 1e-10 * max(1.0, abs(lap))


def test_norm_matrices_positive_definite(coarse_mesh):
    d = Discretization(coarse_mesh, 3)
    for k in (1, 2):
        ev = np.linalg.eigvalsh(norm_matrix(d, k).toarray())
        assert ev.min() > 0


def test_penalty_vanishes_for_global_linear_function_inside():
    d = Discretization(square_mesh(3), 2, curved=False)
    # Lagrange coefficients of a global linear function: its nodal values
    from curveddg.space import lattice_nodes

    nodes = d.maps.map_points(lattice_nodes(2))
    v = (1.0 + 2 * nodes[..., 0] - nodes[..., 1]).ravel()
    inner_values = d.jump_matrix("values", 1, "interior")
    inner_dn = d.jump_matrix("dn", 1, "interior")
    assert abs(v @ inner_values @ v) <= 1e-12
    assert abs(v @ inner_dn @ v) <= 1e-12
    assert v @ penalty_matrix(d, 1) @ v > 0  # boundary values are penalised


def test_coercive_defaults_and_indefinite_reference_quadratic(coarse_mesh):
    d = Discretization(coarse_mesh, 2)
    N = norm_matrix(d, 2).toarray()
    A = quiet_biharmonic(d).matrix.toarray()
    assert sla.eigh(A, N, eigvals_only=True, subset_by_index=[0, 0])[0] > 0.1
    A_ref = quiet_biharmonic(d, PenaltyConfig.reference(2)).matrix.toarray()
    N_ref = norm_matrix(d, 2, PenaltyConfig.reference(2)).toarray()
    assert sla.eigh(A_ref, N_ref, eigvals_only=True, subset_by_index=[0, 0])[0] < 0
