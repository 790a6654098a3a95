"""Backward Euler time stepping on V_h.

Each step solves ``(M + tau A(t^{n+1})) u^{n+1} = M u^n + tau F(t^{n+1})``.
The semi-discrete solution is approximated by Richardson-extrapolated
backward Euler on successively halved steps.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import assemble_form, assemble_mass
from .mesh import Mesh
from .norms import Trajectory, discrete_energy_norm
from .projections import l2_project
from .sparse import DEFAULT_TOL, SolverError, solve_general, solve_spd

__all__ = [
    "StepperConfig",
    "StepSizeError",
    "backward_euler",
    "semi_discrete_reference",
    "galerkin_residual",
    "load_vectors",
]

log = logging.getLogger(__name__)

N_CAP = 2 ** 20


class StepSizeError(ValueError):
    """The step violates ``tau < 1/eta``."""


@dataclass(frozen=True)
class StepperConfig:
    """Uniform steps ``tau = T/N``.

    ``solver="direct"`` factorizes the step matrix once per distinct
    matrix (once overall for time-independent coefficients);
    ``"iterative"`` uses the CG / BiCGSTAB kernels of :mod:`.sparse`.
    """

    N: int
    tol_rel: float = DEFAULT_TOL
    solver: str = "direct"

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise ValueError(f"N must be a positive integer, got {self.N}")
        if self.solver not in ("direct", "iterative"):
            raise ValueError(f"unknown solver {self.solver!r}")

    def tau(self, T: float) -> float:
        return T / self.N


def load_vectors(problem, m: Mesh, times) -> np.ndarray:
    """Load vectors at ``times``, shape ``(n_free, len(times))``."""
    load = problem.load
    if hasattr(load, "assemble_many"):
        return load.assemble_many(m, times)
    from .assembly import assemble_load
    return np.column_stack([assemble_load(m, load, t) for t in times])


def _check_step(problem, tau):
    _, _, eta = problem.coeff.garding_constants()
    if tau * eta >= 1.0:
        raise StepSizeError(
            f"time step {tau:g} violates tau < 1/eta = {1.0 / eta:g}")


class _StepSolver:
    def __init__(self, problem, m, tau, cfg):
        self.problem = problem
        self.m = m
        self.tau = tau
        self.cfg = cfg
        self.M = assemble_mass(m)
        self._key = None
        self._solve = None
        self.symmetric = problem.coeff.b is None

    def _build(self, t):
        A = self.M + self.tau * assemble_form(self.m, self.problem.coeff, t)
        if self.cfg.solver == "direct":
            lu = spla.splu(A.csr.tocsc())
            return lambda rhs, guess: lu.solve(rhs)
        tol = self.cfg.tol_rel
        if self.symmetric:
            return lambda rhs, guess: solve_spd(A, rhs, tol, x0=guess)[0]
        return lambda rhs, guess: solve_general(A, rhs, tol)[0]

    def __call__(self, t, rhs, guess):
        key = t if self.problem.coeff.time_dependent else None
        if self._solve is None or key != self._key:
            self._solve = self._build(t)
            self._key = key
        return self._solve(rhs, guess)


def backward_euler(problem, m: Mesh, cfg: StepperConfig, u0=None) -> Trajectory:
    """Fully discrete solution with ``N`` uniform backward Euler steps.

    The initial value is the L^2 projection of ``problem.u0`` unless
    ``u0`` (free-vertex values) is given.
    """
    T = problem.T
    tau = cfg.tau(T)
    _check_step(problem, tau)
    N = cfg.N
    times = np.linspace(0.0, T, N + 1)
    U = np.empty((N + 1, m.n_free))
    U[0] = l2_project(m, problem.u0).values if u0 is None else u0
    step = _StepSolver(problem, m, tau, cfg)
    Mcsr = step.M.csr
    chunk = max(1, min(N, 2 ** 22 // max(m.n_free, 1)))
    for lo in range(1, N + 1, chunk):
        hi = min(N + 1, lo + chunk)
        F = load_vectors(problem, m, times[lo:hi])
        for j, n in enumerate(range(lo, hi)):
            rhs = Mcsr @ U[n - 1] + tau * F[:, j]
            try:
                U[n] = step(times[n], rhs, U[n - 1])
            except SolverError as exc:
                raise SolverError(f"step {n} of {N} failed: {exc}") from exc
    return Trajectory(m, times, U)


def _extrapolate(coarse: Trajectory, fine: Trajectory) -> Trajectory:
    half = fine.subsample(2)
    return Trajectory(coarse.mesh, coarse.times, 2.0 * half.values - coarse.values)


def semi_discrete_reference(problem, m: Mesh, tol_time: float = 1e-8,
                            n_start: int = 16, n_cap: int = N_CAP,
                            tol_rel: float = DEFAULT_TOL):
    """Backward Euler refined in time until the answer stops changing.

    The answer for ``N`` steps is the Richardson extrapolation
    ``2 U_{2N} - U_N`` (second order in ``tau``). ``N`` is doubled until
    the discrete energy norm of the difference between successive
    answers, compared on the coarser grid, is at most ``tol_time``.
    With ``tol_time = inf`` the plain ``n_start``-step run is returned.
    Raises :class:`SolverError` if ``N`` would exceed ``n_cap``.
    """
    cfg = StepperConfig(n_start, tol_rel)
    if math.isinf(tol_time):
        return backward_euler(problem, m, cfg)
    N = n_start
    coarse = backward_euler(problem, m, cfg)
    fine = backward_euler(problem, m, StepperConfig(2 * N, tol_rel))
    prev = _extrapolate(coarse, fine)
    while True:
        if 4 * N > n_cap:
            raise SolverError(
                f"time integration not converged to {tol_time:g} within {n_cap} steps")
        N *= 2
        coarse, fine = fine, backward_euler(problem, m, StepperConfig(2 * N, tol_rel))
        cur = _extrapolate(coarse, fine)
        sub = cur.subsample(2)
        diff = discrete_energy_norm(
            Trajectory(m, prev.times, sub.values - prev.values))
        log.debug("semi-discrete reference: N=%d difference %.3e", N, diff)
        if diff <= tol_time:
            return cur
        prev = cur


def galerkin_residual(traj: Trajectory, problem, n: int) -> np.ndarray:
    """Residual of the step equation at snapshot ``n >= 1``.

    ``r = M (u^n - u^{n-1}) / tau + A(t^n) u^n - F(t^n)``.
    """
    if not 1 <= n <= traj.n_steps:
        raise IndexError(f"step index {n} outside 1..{traj.n_steps}")
    m = traj.mesh
    t = traj.times[n]
    tau = traj.times[n] - traj.times[n - 1]
    u, u_prev = traj.values[n], traj.values[n - 1]
    A = assemble_form(m, problem.coeff, t)
    F = load_vectors(problem, m, [t])[:, 0]
    return assemble_mass(m) @ ((u - u_prev) / tau) + A @ u - F
