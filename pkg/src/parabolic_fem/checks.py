"""Invariant suites run by ``parabolic-fem verify``.

Each suite returns a :class:`CheckResult`; a suite that raises counts as
failed. The suites are sized to run in a few seconds each.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .assembly import (CoefficientField, FeFunction, assemble_form,
                       assemble_h1_matrix, assemble_mass, assemble_stiffness,
                       integrate_against_hats)
from .exact import WeakRecipeLoad
from .mesh import Mesh, build_interval_mesh, build_square_mesh, refine_uniform
from .norms import h1_norm, l2_norm
from .problems import (NORM_NAMES, ProblemSpec, SpectralSeries, checkerboard_coefficient,
                       get_problem)
from .projections import (h1_error, h1_project, hm1_error_surrogate, l2_error,
                          l2_project)
from .sparse import solve_dense_oracle, solve_general, solve_spd
from .study import fit_rate
from .timestepping import StepperConfig, backward_euler, galerkin_residual, load_vectors

__all__ = ["CheckResult", "SUITES", "run_suite", "run_all"]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str
    seconds: float = 0.0

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.name:<28s} {self.detail} ({self.seconds:.1f} s)"


def _sin1(x):
    return np.sin(np.pi * x[:, 0])


def _sin1_grad(x):
    return (np.pi * np.cos(np.pi * x[:, 0]))[:, None]


def _sin2(x):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def _sin2_grad(x):
    s0, s1 = np.sin(np.pi * x[:, 0]), np.sin(np.pi * x[:, 1])
    c0, c1 = np.cos(np.pi * x[:, 0]), np.cos(np.pi * x[:, 1])
    return np.pi * np.column_stack([c0 * s1, s0 * c1])


def _test_meshes():
    return [build_interval_mesh(16), build_square_mesh(8)]


def check_projections(tol=1e-9, seed=0) -> CheckResult:
    """Idempotence of both projections and L^2 orthogonality of the residual."""
    rng = np.random.default_rng(seed)
    worst_idem = 0.0
    worst_orth = 0.0
    for m, g in zip(_test_meshes(), (_sin1, _sin2)):
        v = FeFunction(m, rng.standard_normal(m.n_free))
        worst_idem = max(worst_idem, np.max(np.abs(l2_project(m, v).values - v.values)))
        if m.dim == 1:
            xs, full = m.vertices[:, 0], v.full()
            slopes = np.diff(full) / np.diff(xs)

            def pw(x):
                return np.interp(x[:, 0], xs, full)

            def pw_grad(x):
                cell = np.clip(np.searchsorted(xs, x[:, 0]) - 1, 0, slopes.size - 1)
                return slopes[cell][:, None]

            x_h1 = h1_project(m, pw, pw_grad).values
            worst_idem = max(worst_idem, np.max(np.abs(x_h1 - v.values)))
        p = l2_project(m, g)
        resid = integrate_against_hats(m, g)[m.free_vertices] - assemble_mass(m) @ p.values
        worst_orth = max(worst_orth, float(np.max(np.abs(resid))))
    ok = worst_idem <= tol and worst_orth <= tol
    return CheckResult("projections", ok,
                       f"idempotence {worst_idem:.2e}, orthogonality {worst_orth:.2e}")


def projection_rates(levels: int = 5):
    """Fitted rates of the L^2 projection of ``sin(pi x)`` in L^2, H^1 and H^{-1}."""
    m = build_interval_mesh(4)
    hs, e0, e1, em1 = [], [], [], []
    for _ in range(levels):
        p = l2_project(m, _sin1)
        hs.append(m.h_max)
        e0.append(l2_error(m, _sin1, p))
        e1.append(h1_error(m, _sin1, _sin1_grad, p))
        em1.append(hm1_error_surrogate(m, _sin1, p))
        m = refine_uniform(m)
    return fit_rate(hs, e0), fit_rate(hs, e1), fit_rate(hs, em1)


def check_projection_rates() -> CheckResult:
    r0, r1, rm1 = projection_rates()
    ok = r0 >= 1.9 and r1 >= 0.9 and rm1 >= 2.8
    return CheckResult("projection rates", ok,
                       f"L2 {r0:.3f} (>=1.9), H1 {r1:.3f} (>=0.9), H-1 {rm1:.3f} (>=2.8)")


def random_coefficients(rng, dim: int) -> CoefficientField:
    """Smooth, time-dependent coefficients with random bounds and a convection term."""
    a_lo = rng.uniform(0.1, 1.0)
    a_amp = rng.uniform(0.0, 2.0)
    b_sup = rng.uniform(0.0, 3.0)
    c_sup = rng.uniform(0.0, 2.0)
    k = rng.uniform(1.0, 5.0, size=dim)
    direction = rng.standard_normal(dim)
    direction /= np.linalg.norm(direction)

    def a(x, t):
        return a_lo + a_amp * np.sin(x @ k + t) ** 2

    def b(x, t):
        return b_sup * np.cos(x @ k - t)[:, None] * direction

    def c(x, t):
        return c_sup * np.sin(x @ k * 2.0 + t)

    return CoefficientField(a=a, c=c, a_lower=a_lo, a_sup=a_lo + a_amp,
                            c_sup=c_sup, b=b, b_sup=b_sup, time_dependent=True)


def check_garding(n_samples: int = 200, seed=1) -> CheckResult:
    """``a(u,u;t) + eta ||u||^2 >= alpha ||u||_{H^1}^2`` on random samples."""
    rng = np.random.default_rng(seed)
    meshes = _test_meshes()
    worst = np.inf
    for i in range(n_samples):
        m = meshes[i % 2]
        coeff = random_coefficients(rng, m.dim)
        _, alpha, eta = coeff.garding_constants()
        t = rng.uniform(0.0, 1.0)
        u = rng.standard_normal(m.n_free)
        lhs = u @ (assemble_form(m, coeff, t) @ u) + eta * l2_norm(FeFunction(m, u)) ** 2
        rhs = alpha * h1_norm(FeFunction(m, u)) ** 2
        worst = min(worst, (lhs - rhs) / rhs)
    return CheckResult("garding", worst >= -1e-12,
                       f"{n_samples} samples, min relative slack {worst:.3e}")


def _residual_cases():
    yield get_problem("smooth1d"), 1, 8
    yield get_problem("smooth2d"), 1, 8
    yield get_problem("checkerboard"), 1, 8
    yield get_problem("spectral-p2", n_modes=32), 2, 16
    base = get_problem("smooth2d")
    coeff = random_coefficients(np.random.default_rng(2), 2)
    eta = coeff.garding_constants()[2]
    N = int(np.ceil(2.0 * eta * base.T))
    yield replace(base, coeff=coeff, load=WeakRecipeLoad(base.exact, coeff)), 1, N


def check_galerkin_residual(tol=1e-9) -> CheckResult:
    """Every step of backward Euler satisfies its defining equation."""
    worst = 0.0
    for problem, level, N in _residual_cases():
        m = problem.mesh(level)
        for solver in ("direct", "iterative"):
            traj = backward_euler(problem, m, StepperConfig(N, solver=solver))
            scale = max(1.0, float(np.max(np.abs(load_vectors(problem, m, traj.times)))))
            for n in range(1, N + 1):
                r = galerkin_residual(traj, problem, n)
                worst = max(worst, float(np.max(np.abs(r))) / scale)
    return CheckResult("galerkin residual", worst <= tol, f"max scaled residual {worst:.2e}")


def _jittered_square(n, rng, amount=0.25):
    m = build_square_mesh(n)
    v = m.vertices.copy()
    free = m.free_vertices
    v[free] += rng.uniform(-amount, amount, size=(free.size, 2)) / n
    return Mesh(v, m.cells, m.box)


def check_solvers(tol=1e-8, seed=3) -> CheckResult:
    """Iterative solvers against the dense LU oracle for n up to 500."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    sizes = []
    for n in (4, 8, 12, 16, 20, 23):
        m = _jittered_square(n, rng)
        coeff = random_coefficients(rng, 2)
        systems = [(assemble_mass(m), True), (assemble_stiffness(m), True),
                   (assemble_h1_matrix(m), True),
                   (assemble_mass(m) + 0.1 * assemble_form(m, coeff, 0.3), False)]
        sizes.append(m.n_free)
        for A, spd in systems:
            b = rng.standard_normal(A.n)
            x_ref = solve_dense_oracle(A, b)
            x = solve_spd(A, b, 1e-12)[0] if spd else solve_general(A, b, 1e-12)[0]
            worst = max(worst, float(np.max(np.abs(x - x_ref)) / max(1.0, np.max(np.abs(x_ref)))))
    return CheckResult("solver agreement", worst <= tol,
                       f"n up to {max(sizes)}, max deviation {worst:.2e}")


class _ZeroLoad:
    def assemble_many(self, m, times):
        return np.zeros((m.n_free, len(times)))


def _decay_problem(base, coeff):
    return ProblemSpec(name="decay", dim=base.dim, box=base.box, T=1.0, coeff=coeff,
                       load=_ZeroLoad(), u0=None, exact=None, base_mesh=lambda: base)


def check_l2_monotone(seed=4) -> CheckResult:
    """With ``f = 0``, ``b = 0`` and ``c >= 0`` the L^2 norm never grows."""
    rng = np.random.default_rng(seed)
    cases = [
        (build_interval_mesh(16), CoefficientField.constant_coefficients(1.0, 0.5)),
        (build_square_mesh(8), CoefficientField.constant_coefficients(2.0)),
        (build_square_mesh(8, -1.0, 1.0, quadrant_aligned=True), checkerboard_coefficient(0.1)),
    ]
    worst = -np.inf
    steps = 0
    for base, coeff in cases:
        problem = _decay_problem(base, coeff)
        for N in (4, 64):
            u0 = rng.standard_normal(base.n_free)
            traj = backward_euler(problem, base, StepperConfig(N), u0=u0)
            norms = np.array([l2_norm(s) for s in traj.snapshots])
            worst = max(worst, float(np.max(np.diff(norms) / norms[:-1])))
            steps += N
    return CheckResult("L2 monotonicity", worst <= 1e-12,
                       f"{steps} steps, largest relative growth {worst:.2e}")


def check_spectral_norms(tol=1e-10) -> CheckResult:
    """Declared series norms against summation with twice the truncation."""
    worst = 0.0
    count = 0
    for p in (2.0, 1.5):
        series = SpectralSeries(p, 0.05)
        problem = get_problem("spectral-p2" if p == 2.0 else "spectral-p32", n_modes=8)
        for name in NORM_NAMES:
            declared = problem.declared_norms[name]
            if not series.converges(name):
                if np.isfinite(declared):
                    return CheckResult("spectral norms", False, f"{name} should diverge")
                continue
            n = series.tail_threshold(name)
            doubled = np.sqrt(series.norm_squared(name, 2 * n))
            worst = max(worst, abs(declared - doubled) / doubled)
            count += 1
    return CheckResult("spectral norms", worst <= tol,
                       f"{count} declared norms, max relative deviation {worst:.2e}")


SUITES = {
    "projections": check_projections,
    "projection-rates": check_projection_rates,
    "garding": check_garding,
    "galerkin-residual": check_galerkin_residual,
    "solvers": check_solvers,
    "l2-monotone": check_l2_monotone,
    "spectral-norms": check_spectral_norms,
}


def run_suite(name: str) -> CheckResult:
    start = time.perf_counter()
    try:
        res = SUITES[name]()
    except Exception as exc:  # a crashing suite is a failing suite
        res = CheckResult(name, False, f"raised {type(exc).__name__}: {exc}")
    return CheckResult(res.name, res.passed, res.detail, time.perf_counter() - start)


def run_all(names=None):
    return [run_suite(n) for n in (names or SUITES)]
