import numpy as np
import pytest

from parabolic_fem.assembly import (CoefficientError, CoefficientField, FeFunction,
                                    assemble_form, assemble_h1_matrix, assemble_load,
                                    assemble_mass, assemble_stiffness,
                                    integrate_against_hats,
                                    integrate_gradient_against_hats, interpolate_nodal)
from parabolic_fem.mesh import build_interval_mesh, build_square_mesh


def test_1d_element_matrices():
    h = 0.25
    m = build_interval_mesh(4)
    M = assemble_mass(m).to_dense()
    K = assemble_stiffness(m).to_dense()
    np.testing.assert_allclose(np.diag(M), 2 * h / 3)
    np.testing.assert_allclose(np.diag(M, 1), h / 6)
    np.testing.assert_allclose(np.diag(K), 2 / h)
    np.testing.assert_allclose(np.diag(K, 1), -1 / h)


def test_2d_stiffness_is_five_point_stencil():
    n = 5
    K = assemble_stiffness(build_square_mesh(n)).to_dense()
    m1 = n - 1
    T = 2 * np.eye(m1) - np.eye(m1, k=1) - np.eye(m1, k=-1)
    five_point = np.kron(T, np.eye(m1)) + np.kron(np.eye(m1), T)
    np.testing.assert_allclose(K, five_point, atol=1e-13)


def test_mass_total_and_symmetry():
    m = build_square_mesh(3, -1.0, 1.0)
    M = assemble_mass(m, restrict=False)
    one = np.ones(m.n_vertices)
    assert one @ (M @ one) == pytest.approx(4.0, rel=1e-14)
    assert M.is_symmetric(1e-15)
    np.testing.assert_allclose(integrate_against_hats(m, lambda x: np.ones(len(x))),
                               M @ one, rtol=1e-13)


def test_h1_matrix_is_sum():
    m = build_square_mesh(4)
    G = assemble_h1_matrix(m).to_dense()
    np.testing.assert_allclose(G, assemble_mass(m).to_dense() + assemble_stiffness(m).to_dense())


def test_form_with_constant_coefficients():
    m = build_square_mesh(4)
    coeff = CoefficientField.constant_coefficients(a=2.0, c=3.0)
    A = assemble_form(m, coeff, 0.0).to_dense()
    ref = 2 * assemble_stiffness(m).to_dense() + 3 * assemble_mass(m).to_dense()
    np.testing.assert_allclose(A, ref, atol=1e-13)


@pytest.mark.parametrize("mesh", [build_interval_mesh(6), build_square_mesh(4)])
def test_constant_convection_is_skew(mesh):
    b = np.full(mesh.dim, 0.7)
    A = assemble_form(mesh, CoefficientField.constant_coefficients(a=0.0 + 1.0, b=b), 0.0)
    B = A.to_dense() - assemble_stiffness(mesh).to_dense()
    np.testing.assert_allclose(B + B.T, 0.0, atol=1e-13)
    assert np.max(np.abs(B)) > 0.01


def test_convection_row_is_test_index_1d():
    # int b phi_j' phi_i on a uniform 1D mesh: +b/2 above the diagonal
    m = build_interval_mesh(4)
    A = assemble_form(m, CoefficientField(a=lambda x, t: np.ones(len(x)),
                                          c=lambda x, t: np.zeros(len(x)),
                                          a_lower=1.0, a_sup=1.0,
                                          b=lambda x, t: np.ones((len(x), 1)), b_sup=1.0), 0.0)
    B = A.to_dense() - assemble_stiffness(m).to_dense()
    np.testing.assert_allclose(np.diag(B, 1), 0.5)
    np.testing.assert_allclose(np.diag(B, -1), -0.5)


def test_garding_constants_formula():
    coeff = CoefficientField(a=lambda x, t: np.full(len(x), 2.0), c=lambda x, t: np.zeros(len(x)),
                             a_lower=2.0, a_sup=3.0, c_sup=0.5,
                             b=lambda x, t: np.zeros((len(x), 1)), b_sup=4.0)
    cont, alpha, eta = coeff.garding_constants()
    assert cont == pytest.approx(7.5)
    assert alpha == pytest.approx(1.0)
    assert eta == pytest.approx(1.0 + 16.0 / 4.0 + 0.5)


def test_coefficient_bounds_are_enforced():
    bad = CoefficientField(a=lambda x, t: np.full(len(x), 0.5), c=lambda x, t: np.zeros(len(x)),
                           a_lower=1.0, a_sup=2.0)
    with pytest.raises(CoefficientError):
        assemble_form(build_interval_mesh(4), bad, 0.0)
    big_c = CoefficientField(a=lambda x, t: np.ones(len(x)), c=lambda x, t: np.full(len(x), 3.0),
                             a_lower=1.0, a_sup=1.0, c_sup=1.0)
    with pytest.raises(CoefficientError):
        assemble_form(build_interval_mesh(4), big_c, 0.0)


def test_load_paths_agree():
    m = build_square_mesh(4)
    f = lambda x, t: np.sin(x[:, 0] + t) * x[:, 1]
    direct = integrate_against_hats(m, lambda x: f(x, 0.3))[m.free_vertices]
    np.testing.assert_allclose(assemble_load(m, f, 0.3), direct)


def test_gradient_moments_of_linear_function_match_stiffness():
    m = build_square_mesh(4)
    g = m.vertices @ np.array([1.0, -2.0]) + 0.5
    got = integrate_gradient_against_hats(m, lambda x: np.tile([1.0, -2.0], (len(x), 1)))
    np.testing.assert_allclose(got, assemble_stiffness(m, restrict=False) @ g, atol=1e-13)
    weighted = integrate_gradient_against_hats(
        m, lambda x: np.tile([1.0, -2.0], (len(x), 1)), weight=lambda x: np.full(len(x), 3.0))
    np.testing.assert_allclose(weighted, 3.0 * got, atol=1e-13)


def test_fe_function_and_interpolation():
    m = build_interval_mesh(4)
    u = interpolate_nodal(m, lambda x: x[:, 0] ** 2)
    np.testing.assert_allclose(u.values, [1 / 16, 1 / 4, 9 / 16])
    np.testing.assert_allclose(u.full(), [0, 1 / 16, 1 / 4, 9 / 16, 0])
    np.testing.assert_allclose((2 * u - u).values, u.values)
    with pytest.raises(ValueError):
        interpolate_nodal(m, lambda x: np.full(len(x), np.nan))
    with pytest.raises(ValueError):
        FeFunction(m, np.zeros(4))
