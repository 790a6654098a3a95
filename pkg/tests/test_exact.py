import numpy as np
import pytest
from scipy.integrate import quad

from parabolic_fem.exact import (CallableFields, SeparableSolution, SineModes1D,
                                 TimeFactors, WeakRecipeLoad, interval_integrals,
                                 product_integrals)
from parabolic_fem.mesh import build_interval_mesh, build_square_mesh, refine_uniform
from parabolic_fem.problems import get_problem

FACTORS = TimeFactors(np.array([1.0, 0.5, 2.0]), np.array([0.0, 3.0, 40.0]),
                      np.array([0.3, 0.0, -1.0]))


def test_values_shapes_and_derivative():
    assert FACTORS(0.2).shape == (3,)
    assert FACTORS(np.linspace(0, 1, 5)).shape == (5, 3)
    t, d = 0.37, 1e-6
    fd = (FACTORS(t + d) - FACTORS(t - d)) / (2 * d)
    np.testing.assert_allclose(FACTORS.derivative()(t), fd, rtol=1e-7, atol=1e-7)


def test_product_integrals_against_quadrature():
    got = product_integrals(FACTORS, FACTORS.derivative(), 0.1, 0.9)
    for k in range(3):
        for l in range(3):
            ref = quad(lambda t: FACTORS(t)[k] * FACTORS.derivative()(t)[l], 0.1, 0.9,
                       limit=200)[0]
            assert got[k, l] == pytest.approx(ref, abs=1e-12)


def test_interval_integrals_against_quadrature():
    times = np.array([0.0, 0.001, 0.3, 1.0])
    I0, I1 = interval_integrals(FACTORS, times)
    for n in range(3):
        a, b = times[n], times[n + 1]
        for k in range(3):
            r0 = quad(lambda t: FACTORS(t)[k] * (b - t) / (b - a), a, b, limit=200)[0]
            r1 = quad(lambda t: FACTORS(t)[k] * (t - a) / (b - a), a, b, limit=200)[0]
            assert I0[n, k] == pytest.approx(r0, abs=1e-13)
            assert I1[n, k] == pytest.approx(r1, abs=1e-13)


def test_sine_modes_exact_moments_match_quadrature():
    modes = SineModes1D([1, 3, 17])
    generic = CallableFields(
        [lambda x, k=k: np.sin(k * np.pi * x[:, 0]) for k in (1, 3, 17)],
        [lambda x, k=k: (k * np.pi * np.cos(k * np.pi * x[:, 0]))[:, None] for k in (1, 3, 17)],
        dim=1)
    m = refine_uniform(build_interval_mesh(16))
    np.testing.assert_allclose(modes.mass_moments(m), generic.mass_moments(m), atol=1e-10)
    np.testing.assert_allclose(modes.h1_moments(m), generic.h1_moments(m), atol=1e-8)
    l2, h1 = modes.gram(m)
    l2g, h1g = generic.gram(m)
    np.testing.assert_allclose(l2, l2g, atol=1e-10)
    np.testing.assert_allclose(h1, h1g, rtol=1e-6, atol=1e-8)


def test_separable_solution_derivatives():
    u = get_problem("smooth2d").exact
    x = np.array([[0.3, 0.6], [0.5, 0.5]])
    d = 1e-6
    fd_t = (u(x, 0.4 + d) - u(x, 0.4 - d)) / (2 * d)
    np.testing.assert_allclose(u.dt(x, 0.4), fd_t, rtol=1e-7)
    fd_x = (u(x + [d, 0.0], 0.4) - u(x - [d, 0.0], 0.4)) / (2 * d)
    np.testing.assert_allclose(u.grad(x, 0.4)[:, 0], fd_x, rtol=1e-7, atol=1e-9)
    with pytest.raises(ValueError):
        SeparableSolution(TimeFactors.sines([1.0, 2.0]), SineModes1D([1]))


@pytest.mark.parametrize("name", ["smooth1d", "smooth2d"])
def test_weak_recipe_matches_pointwise_load(name):
    p = get_problem(name)
    m = p.mesh(1)
    for t in (0.0, 0.4, 1.0):
        np.testing.assert_allclose(p.load.assemble(m, t), p.pointwise_load.assemble(m, t),
                                   atol=1e-9)


def test_checkerboard_eps_one_load_paths_agree():
    p = get_problem("checkerboard", eps=1.0)
    m = p.mesh(1)
    np.testing.assert_allclose(p.load.assemble(m, 0.3), p.pointwise_load.assemble(m, 0.3),
                               atol=1e-9)


def test_assemble_many_matches_single_times():
    p = get_problem("spectral-p2", n_modes=16)
    m = p.mesh(0)
    times = np.array([0.0, 0.25, 0.9])
    many = p.load.assemble_many(m, times)
    for j, t in enumerate(times):
        np.testing.assert_allclose(many[:, j], p.load.assemble(m, t), atol=1e-12)


def test_weak_recipe_with_variable_coefficient_uses_quadrature():
    from parabolic_fem.assembly import CoefficientField
    coeff = CoefficientField(a=lambda x, t: 1.0 + x[:, 0], c=lambda x, t: np.zeros(len(x)),
                             a_lower=1.0, a_sup=2.0)
    exact = SeparableSolution(TimeFactors.sines([1.0]), SineModes1D([1]))
    load = WeakRecipeLoad(exact, coeff)
    m = build_interval_mesh(64)

    def f(x, t):
        s = np.pi * x[:, 0]
        # u' - ((1 + x) u_x)_x for u = sin(pi x) sin(t)
        return (np.sin(s) * np.cos(t)
                - (np.pi * np.cos(s) - (1 + x[:, 0]) * np.pi ** 2 * np.sin(s)) * np.sin(t))

    from parabolic_fem.assembly import integrate_against_hats
    ref = integrate_against_hats(m, lambda x: f(x, 0.7))[m.free_vertices]
    np.testing.assert_allclose(load.assemble(m, 0.7), ref, atol=1e-10)


def test_square_mesh_generic_gram():
    fields = CallableFields([lambda x: x[:, 0] * x[:, 1]],
                            [lambda x: np.column_stack([x[:, 1], x[:, 0]])], dim=2)
    l2, h1 = fields.gram(build_square_mesh(2))
    assert l2[0, 0] == pytest.approx(1.0 / 9.0, rel=1e-13)
    assert h1[0, 0] == pytest.approx(1.0 / 9.0 + 2.0 / 3.0, rel=1e-13)


def test_sine_modes_form_moments_match_generic_path():
    from parabolic_fem.assembly import CoefficientField
    from parabolic_fem.exact import FieldFamily
    modes = SineModes1D([1, 2, 9])
    coeff = CoefficientField.constant_coefficients(a=1.5, c=0.5)
    m = build_interval_mesh(32)
    generic = FieldFamily.form_moments(modes, m, coeff, 0.0)
    np.testing.assert_allclose(modes.form_moments(m, coeff, 0.0), generic, atol=1e-9)
