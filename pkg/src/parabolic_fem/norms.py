"""Norms of finite element functions, trajectories and their errors.

The H^{-1} norm of a functional ``F`` on V_h is the discrete dual norm
``sup_{v in V_h} F(v) / ||v||_{H^1} = sqrt(F^T G^{-1} F)`` with ``G`` the
H^1 Gram matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from functools import lru_cache

import numpy as np
import scipy.sparse.linalg as spla

from .assembly import FeFunction, assemble_h1_matrix, assemble_mass
from .exact import SeparableSolution, interval_integrals, product_integrals
from .mesh import Mesh, prolongation, refine_uniform
from .sparse import DEFAULT_TOL, solve_spd

__all__ = [
    "Trajectory",
    "ErrorBundle",
    "dual_norm_h",
    "dual_norms_h",
    "l2_norm",
    "h1_norm",
    "discrete_energy_norm",
    "w_norm_error",
    "h1_factor",
]


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Snapshots ``values[n]`` of a V_h function at ``times[n]``."""

    mesh: Mesh
    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.ndim != 1 or times.size < 1:
            raise ValueError("times must be a nonempty 1D array")
        if np.any(np.diff(times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if values.shape != (times.size, self.mesh.n_free):
            raise ValueError(f"values must have shape ({times.size}, "
                             f"{self.mesh.n_free}), got {values.shape}")
        times.setflags(write=False)
        values.setflags(write=False)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    @property
    def n_steps(self) -> int:
        return self.times.size - 1

    @property
    def snapshots(self) -> list[FeFunction]:
        return [FeFunction(self.mesh, v) for v in self.values]

    def __getitem__(self, n) -> FeFunction:
        return FeFunction(self.mesh, self.values[n])

    def subsample(self, stride: int) -> Trajectory:
        """Every ``stride``-th snapshot; ``stride`` must divide ``n_steps``."""
        if self.n_steps % stride:
            raise ValueError(f"stride {stride} does not divide {self.n_steps} steps")
        return Trajectory(self.mesh, self.times[::stride], self.values[::stride])


@dataclass(frozen=True)
class ErrorBundle:
    """Errors of a trajectory against an exact solution.

    ``e_W`` is the energy-norm error of the piecewise-linear-in-time
    interpolant, the sum of ``e_L2H1`` and ``e_dt_Hm1``. ``e_discrete``
    is the step-sum version with difference quotients of the exact
    solution in place of its derivative.
    """

    e_W: float
    e_LinfL2: float
    e_L2H1: float
    e_dt_Hm1: float
    e_discrete: float

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@lru_cache(maxsize=32)
def h1_factor(m: Mesh):
    """Sparse LU factorization of the H^1 Gram matrix of ``m``."""
    return spla.splu(assemble_h1_matrix(m).csr.tocsc())


def dual_norm_h(m: Mesh, F, tol_rel: float = DEFAULT_TOL) -> float:
    """Discrete H^{-1} norm of the functional with free-vertex values ``F``."""
    F = np.asarray(F, dtype=float)
    if not np.any(F):
        return 0.0
    y, _ = solve_spd(assemble_h1_matrix(m), F, tol_rel)
    return float(np.sqrt(max(F @ y, 0.0)))


def dual_norms_h(m: Mesh, F) -> np.ndarray:
    """Dual norms of the columns of ``F`` using a cached factorization."""
    F = np.asarray(F, dtype=float)
    if F.ndim == 1:
        F = F[:, None]
    out = np.empty(F.shape[1])
    lu = h1_factor(m)
    for s in range(0, F.shape[1], 512):
        block = F[:, s:s + 512]
        out[s:s + 512] = np.einsum("ij,ij->j", block, lu.solve(block))
    return np.sqrt(np.maximum(out, 0.0))


def l2_norm(u: FeFunction) -> float:
    x = u.values
    return float(np.sqrt(max(x @ (assemble_mass(u.mesh) @ x), 0.0)))


def h1_norm(u: FeFunction) -> float:
    x = u.values
    return float(np.sqrt(max(x @ (assemble_h1_matrix(u.mesh) @ x), 0.0)))


def _quad_rows(S, Q):
    """``s_n^T Q s_n`` for each row of the dense array ``S``."""
    return np.einsum("nk,nk->n", S @ Q, S)


def _quadform_rows(A, U):
    """``u_n^T A u_n`` for each row of ``U``."""
    return np.einsum("ij,ij->i", U, (A.csr @ U.T).T)


def discrete_energy_norm(traj: Trajectory) -> float:
    """``sqrt(sum_n tau_n (||d_tau u^n||_{-1,h}^2 + ||u^n||_{H^1}^2))``."""
    if traj.n_steps < 1:
        raise ValueError("discrete energy norm needs at least two snapshots")
    m = traj.mesh
    tau = np.diff(traj.times)
    U = traj.values
    D = (U[1:] - U[:-1]) / tau[:, None]
    M = assemble_mass(m)
    dual = dual_norms_h(m, M.csr @ D.T) ** 2
    h1 = _quadform_rows(assemble_h1_matrix(m), U[1:])
    return float(np.sqrt(np.sum(tau * (dual + h1))))


def _gram_mesh(m: Mesh, target: float = 1.0 / 32):
    lo, hi = m.box
    g = m
    while g.h_max > target * (hi - lo):
        g = refine_uniform(g)
    return g


class _DualSpace:
    """Test space for the H^{-1} parts of the error.

    ``refinements=0`` uses V_h itself; otherwise V_h of a uniformly
    refined mesh, into which the trajectory is prolonged.
    """

    def __init__(self, m: Mesh, exact: SeparableSolution, refinements: int):
        fine = m
        for _ in range(refinements):
            fine = refine_uniform(fine)
        self.mesh = fine
        free_f = fine.free_vertices
        self.Bm = exact.space.mass_moments(fine)[free_f]
        self.M = assemble_mass(fine).csr
        if refinements:
            P = prolongation(m, fine)
            self.P = P[free_f][:, m.free_vertices]
        else:
            self.P = None
        lu = h1_factor(fine)
        self.Z = lu.solve(np.asfortranarray(self.Bm))
        self.lu = lu

    def lift(self, D):
        """Mass-weighted functionals of coarse V_h functions (rows of D)."""
        X = D.T if self.P is None else self.P @ D.T
        return self.M @ X

    def apply_inverse(self, F):
        out = np.empty_like(F)
        for s in range(0, F.shape[1], 512):
            out[:, s:s + 512] = self.lu.solve(np.asfortranarray(F[:, s:s + 512]))
        return out


def w_norm_error(traj: Trajectory, exact, dual_refinements: int = 0,
                 chunk: int = 2048) -> ErrorBundle:
    """Errors of ``traj`` (and its linear interpolant in time) against ``exact``.

    ``exact`` is a :class:`SeparableSolution` or anything with an
    ``exact`` attribute holding one. Time integrals are evaluated in
    closed form: every temporal factor of the exact solution is a
    sinusoid and the interpolant is linear on each step. Space integrals
    involving the exact solution use its moments against the hat
    functions; the H^{-1} norms use the discrete dual norm on V_h of the
    mesh refined ``dual_refinements`` times.
    """
    if traj.n_steps < 1:
        raise ValueError("error evaluation needs at least two snapshots")
    exact = getattr(exact, "exact", exact)
    m = traj.mesh
    free = m.free_vertices
    s = exact.time
    ds = s.derivative()
    times = traj.times
    t0, t1 = float(times[0]), float(times[-1])
    tau = np.diff(times)
    U = traj.values
    N = traj.n_steps

    G = assemble_h1_matrix(m)
    M = assemble_mass(m)
    l2_gram, h1_gram = exact.space.gram(_gram_mesh(m))
    B1 = exact.space.h1_moments(m)[free]
    Bm = exact.space.mass_moments(m)[free]
    dual = _DualSpace(m, exact, dual_refinements)
    BZ = dual.Bm.T @ dual.Z

    GU = (G.csr @ U.T).T
    MU = (M.csr @ U.T).T
    uGu = np.einsum("ij,ij->i", U, GU)
    uMu = np.einsum("ij,ij->i", U, MU)
    uGu_next = np.einsum("ij,ij->i", U[:-1], GU[1:])

    # || u - u_tilde ||_{L2(H1)}^2 = int ||u||^2 - 2 int (u, u_tilde) + int ||u_tilde||^2
    exact_h1 = float(np.sum(h1_gram * product_integrals(s, s, t0, t1)))
    interp_h1 = float(np.sum(tau / 3.0 * (uGu[:-1] + uGu_next + uGu[1:])))
    cross_h1 = 0.0
    linf2 = 0.0
    disc_h1 = 0.0
    disc_dual = 0.0
    dual_cross = 0.0
    interp_dual = 0.0
    for lo in range(0, N, chunk):
        hi = min(N, lo + chunk)
        Y = U[lo:hi + 1] @ B1
        I0, I1 = interval_integrals(s, times[lo:hi + 1])
        cross_h1 += float(np.sum(I0 * Y[:-1]) + np.sum(I1 * Y[1:]))

        S = s(times[lo:hi + 1])
        # nodal L2 and H1 errors
        l2_err = (_quad_rows(S, l2_gram)
                  - 2.0 * np.einsum("nk,nk->n", S, U[lo:hi + 1] @ Bm)
                  + uMu[lo:hi + 1])
        linf2 = max(linf2, float(np.max(l2_err)))
        h1_err = (_quad_rows(S[1:], h1_gram)
                  - 2.0 * np.einsum("nk,nk->n", S[1:], Y[1:]) + uGu[lo + 1:hi + 1])
        disc_h1 += float(np.sum(tau[lo:hi] * h1_err))

        # time-derivative terms; the interpolant's derivative is constant per step
        Dn = (U[lo + 1:hi + 1] - U[lo:hi]) / tau[lo:hi, None]
        F = dual.lift(Dn)
        GinvF = dual.apply_inverse(F)
        dGd = np.einsum("ij,ij->j", F, GinvF)
        dS = S[1:] - S[:-1]
        ZF = F.T @ dual.Z  # (steps, K): (M d_n)^T G^{-1} Bm
        interp_dual += float(np.sum(tau[lo:hi] * dGd))
        dual_cross += float(np.sum(dS * ZF))
        quot = dS / tau[lo:hi, None]
        disc = (_quad_rows(quot, BZ)
                - 2.0 * np.einsum("nk,nk->n", quot, ZF) + dGd)
        disc_dual += float(np.sum(tau[lo:hi] * disc))

    exact_dual = float(np.sum(BZ * product_integrals(ds, ds, t0, t1)))
    e_L2H1 = np.sqrt(max(exact_h1 - 2.0 * cross_h1 + interp_h1, 0.0))
    e_dt = np.sqrt(max(exact_dual - 2.0 * dual_cross + interp_dual, 0.0))
    return ErrorBundle(
        e_W=float(e_L2H1 + e_dt),
        e_LinfL2=float(np.sqrt(max(linf2, 0.0))),
        e_L2H1=float(e_L2H1),
        e_dt_Hm1=float(e_dt),
        e_discrete=float(np.sqrt(max(disc_h1 + disc_dual, 0.0))),
    )
