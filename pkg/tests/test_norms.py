import numpy as np
import pytest

from parabolic_fem.assembly import (FeFunction, assemble_h1_matrix, assemble_mass,
                                    integrate_against_hats)
from parabolic_fem.exact import SeparableSolution, SineModes1D, TimeFactors
from parabolic_fem.mesh import build_interval_mesh, build_square_mesh
from parabolic_fem.norms import (Trajectory, discrete_energy_norm, dual_norm_h,
                                 dual_norms_h, h1_norm, l2_norm, w_norm_error)
from parabolic_fem.problems import get_problem
from parabolic_fem.projections import h1_error, l2_error
from parabolic_fem.sparse import solve_dense_oracle
from parabolic_fem.timestepping import StepperConfig, backward_euler


def test_dual_norm_trivial_cases():
    m = build_square_mesh(5)
    G = assemble_h1_matrix(m)
    assert dual_norm_h(m, np.zeros(m.n_free)) == 0.0
    for k in (0, 7, m.n_free - 1):
        e = np.zeros(m.n_free)
        e[k] = 1.0
        assert dual_norm_h(m, G @ e) == pytest.approx(np.sqrt(G.to_dense()[k, k]), rel=1e-9)


def test_dual_norm_of_mass_functional_is_bounded_by_l2():
    rng = np.random.default_rng(0)
    m = build_square_mesh(6)
    M = assemble_mass(m)
    for _ in range(5):
        v = rng.standard_normal(m.n_free)
        F = M @ v
        dense = np.sqrt(F @ solve_dense_oracle(assemble_h1_matrix(m), F))
        assert dual_norm_h(m, F) == pytest.approx(dense, rel=1e-9)
        assert dual_norm_h(m, F) <= l2_norm(FeFunction(m, v)) * (1 + 1e-10)


def test_batched_dual_norms_match_single():
    rng = np.random.default_rng(1)
    m = build_interval_mesh(20)
    F = rng.standard_normal((m.n_free, 4))
    np.testing.assert_allclose(dual_norms_h(m, F), [dual_norm_h(m, F[:, j]) for j in range(4)],
                               rtol=1e-9)


def test_single_hat_norms():
    h = 0.5
    m = build_interval_mesh(2)
    hat = FeFunction(m, np.ones(1))
    assert l2_norm(hat) == pytest.approx(np.sqrt(2 * h / 3))
    assert h1_norm(hat) == pytest.approx(np.sqrt(2 * h / 3 + 2 / h))
    assert l2_norm(FeFunction.zeros(m)) == 0.0


def test_homogeneity():
    rng = np.random.default_rng(2)
    m = build_square_mesh(4)
    u = FeFunction(m, rng.standard_normal(m.n_free))
    for alpha in (-3.0, 0.25):
        assert l2_norm(alpha * u) == pytest.approx(abs(alpha) * l2_norm(u), rel=1e-12)
        assert h1_norm(alpha * u) == pytest.approx(abs(alpha) * h1_norm(u), rel=1e-12)
        F = assemble_mass(m) @ u.values
        assert dual_norm_h(m, alpha * F) == pytest.approx(abs(alpha) * dual_norm_h(m, F), rel=1e-9)


def test_discrete_energy_norm_constant_and_zero():
    m = build_square_mesh(4)
    w = np.linspace(1.0, 2.0, m.n_free)
    T = 0.7
    traj = Trajectory(m, np.linspace(0.0, T, 5), np.tile(w, (5, 1)))
    assert discrete_energy_norm(traj) == pytest.approx(np.sqrt(T) * h1_norm(FeFunction(m, w)))
    zero = Trajectory(m, np.linspace(0.0, 1.0, 3), np.zeros((3, m.n_free)))
    assert discrete_energy_norm(zero) == 0.0


def test_discrete_energy_norm_two_steps_by_hand():
    m = build_interval_mesh(4)
    U = np.array([[0.0, 0.0, 0.0], [1.0, 2.0, 0.5], [0.5, -1.0, 1.0]])
    times = np.array([0.0, 0.25, 1.0])
    G = assemble_h1_matrix(m).to_dense()
    M = assemble_mass(m).to_dense()
    total = 0.0
    for n in (1, 2):
        tau = times[n] - times[n - 1]
        F = M @ (U[n] - U[n - 1]) / tau
        total += tau * (F @ np.linalg.solve(G, F) + U[n] @ G @ U[n])
    assert discrete_energy_norm(Trajectory(m, times, U)) == pytest.approx(np.sqrt(total), rel=1e-10)


def test_trajectory_validation():
    m = build_interval_mesh(4)
    with pytest.raises(ValueError):
        Trajectory(m, [0.0, 0.0], np.zeros((2, 3)))
    with pytest.raises(ValueError):
        Trajectory(m, [0.0, 1.0], np.zeros((2, 4)))
    traj = Trajectory(m, [0.0], np.zeros((1, 3)))
    with pytest.raises(ValueError):
        discrete_energy_norm(traj)
    t4 = Trajectory(m, np.linspace(0, 1, 5), np.zeros((5, 3)))
    assert t4.subsample(2).n_steps == 2
    with pytest.raises(ValueError):
        t4.subsample(3)
    assert not t4.values.flags.writeable


def test_zero_exact_and_zero_trajectory_give_zero_errors():
    exact = SeparableSolution(TimeFactors.sines([1.0], amplitude=0.0), SineModes1D([1]))
    m = build_interval_mesh(8)
    traj = Trajectory(m, np.linspace(0, 1, 5), np.zeros((5, m.n_free)))
    assert all(v == 0.0 for v in w_norm_error(traj, exact).as_dict().values())


def _gauss(a, b, n=6):
    s, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (b - a) * s + 0.5 * (a + b), 0.5 * (b - a) * w


def brute_force_errors(traj, exact):
    """Errors of ``traj`` by Gauss quadrature in time and fine quadrature in space."""
    m = traj.mesh
    free = m.free_vertices
    M = assemble_mass(m)
    t, U = traj.times, traj.values
    e_h1 = e_dt = disc = 0.0
    for n in range(traj.n_steps):
        a, b = t[n], t[n + 1]
        tau = b - a
        d = (U[n + 1] - U[n]) / tau
        for s, w in zip(*_gauss(a, b)):
            uh = FeFunction(m, U[n] + (s - a) * d)
            e_h1 += w * h1_error(m, lambda x: exact(x, s), lambda x: exact.grad(x, s), uh) ** 2
            F = integrate_against_hats(m, lambda x: exact.dt(x, s))[free] - M @ d
            e_dt += w * dual_norm_h(m, F) ** 2
        quot = (integrate_against_hats(m, lambda x: exact(x, b) - exact(x, a))[free] / tau
                - M @ d)
        node = h1_error(m, lambda x: exact(x, b), lambda x: exact.grad(x, b), traj[n + 1])
        disc += tau * (dual_norm_h(m, quot) ** 2 + node ** 2)
    linf = max(l2_error(m, lambda x: exact(x, s), traj[n]) for n, s in enumerate(t))
    return np.sqrt(e_h1) + np.sqrt(e_dt), linf, np.sqrt(e_h1), np.sqrt(e_dt), np.sqrt(disc)


# the checkerboard field is a degree-6 polynomial: its H^1 integrand (degree 10)
# is integrated only approximately by the brute-force rule on coarse cells
@pytest.mark.parametrize("name,level,N,rtol", [("smooth1d", 0, 8, 2e-7),
                                               ("smooth2d", 0, 4, 2e-7),
                                               ("checkerboard", 0, 4, 3e-5)])
def test_closed_form_errors_match_brute_force(name, level, N, rtol):
    p = get_problem(name)
    traj = backward_euler(p, p.mesh(level), StepperConfig(N))
    got = w_norm_error(traj, p)
    ref = brute_force_errors(traj, p.exact)
    np.testing.assert_allclose(
        [got.e_W, got.e_LinfL2, got.e_L2H1, got.e_dt_Hm1, got.e_discrete], ref, rtol=rtol)


def test_refined_dual_space_gives_larger_hm1_error():
    p = get_problem("smooth1d")
    traj = backward_euler(p, p.mesh(0), StepperConfig(8))
    coarse = w_norm_error(traj, p).e_dt_Hm1
    fine = w_norm_error(traj, p, dual_refinements=2).e_dt_Hm1
    assert fine >= coarse * (1 - 1e-9)


def test_linf_error_bounded_by_energy_bundle():
    # embedding W(0,T) into C([0,T]; L^2): max L2 error stays below a fixed multiple
    for name in ("smooth1d", "smooth2d"):
        p = get_problem(name)
        for level in (0, 1, 2):
            traj = backward_euler(p, p.mesh(level), StepperConfig(8 * 2 ** level))
            err = w_norm_error(traj, p)
            assert err.e_LinfL2 <= 2.0 * err.e_W
