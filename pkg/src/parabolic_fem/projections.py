"""L^2 and H^1 projections onto V_h, and continuous-side error norms.

Errors between a continuous function and a V_h function are computed
with the fine composite rule of :func:`parabolic_fem.quadrature.fine_rule`.
H^{-1} errors use the discrete dual norm on a refined mesh as a
computable stand-in for the true norm.
"""

from __future__ import annotations

import numpy as np

from .assembly import (FeFunction, assemble_h1_matrix, assemble_mass,
                       barycentric_gradients, integrate_against_hats,
                       integrate_gradient_against_hats, quadrature_points)
from .mesh import Mesh, prolongation, refine_uniform
from .norms import dual_norm_h, h1_norm
from .quadrature import fine_rule
from .sparse import DEFAULT_TOL, solve_spd

__all__ = [
    "l2_project",
    "h1_project",
    "h1_stability_ratio",
    "l2_norm_fn",
    "h1_norm_fn",
    "l2_error",
    "h1_error",
    "hm1_error_surrogate",
]


def _fe_moments(m: Mesh, g: FeFunction) -> np.ndarray:
    """``(g, phi_i)`` over free vertices of ``m`` for ``g`` on ``m`` or a refinement."""
    if g.mesh is m:
        return assemble_mass(m) @ g.values
    P = prolongation(m, g.mesh)
    full = assemble_mass(g.mesh, restrict=False).csr @ g.full()
    return (P.T @ full)[m.free_vertices]


def l2_project(m: Mesh, g, tol_rel: float = DEFAULT_TOL) -> FeFunction:
    """L^2-orthogonal projection of ``g`` onto V_h.

    ``g`` is a point function or a :class:`FeFunction` living on ``m``
    or on a uniform refinement of it.
    """
    if isinstance(g, FeFunction):
        F = _fe_moments(m, g)
    else:
        F = integrate_against_hats(m, g)[m.free_vertices]
    x, _ = solve_spd(assemble_mass(m), F, tol_rel)
    return FeFunction(m, x)


def h1_project(m: Mesh, g, grad, tol_rel: float = DEFAULT_TOL) -> FeFunction:
    """H^1-orthogonal projection of ``g`` (with gradient ``grad``) onto V_h."""
    free = m.free_vertices
    rhs = (integrate_gradient_against_hats(m, grad)[free]
           + integrate_against_hats(m, g)[free])
    x, _ = solve_spd(assemble_h1_matrix(m), rhs, tol_rel)
    return FeFunction(m, x)


def _at_quadrature(m: Mesh, rule, uh: FeFunction | None):
    xq = quadrature_points(m, rule)
    if uh is None:
        return xq, None, None
    full = uh.full()[m.cells]  # (nc, k)
    vals = full @ rule.points.T  # (nc, nq)
    grads = np.einsum("ck,ckd->cd", full, barycentric_gradients(m))
    return xq, vals, grads


def l2_error(m: Mesh, g, uh: FeFunction | None = None) -> float:
    """``||g - uh||_{L^2}``; ``uh=None`` gives ``||g||_{L^2}``."""
    rule = fine_rule(m.dim)
    xq, vals, _ = _at_quadrature(m, rule, uh)
    nc, nq, d = xq.shape
    diff = np.asarray(g(xq.reshape(-1, d)), dtype=float).reshape(nc, nq)
    if vals is not None:
        diff = diff - vals
    return float(np.sqrt(np.sum(m.measures[:, None] * rule.weights * diff ** 2)))


def h1_error(m: Mesh, g, grad, uh: FeFunction | None = None) -> float:
    """``||g - uh||_{H^1}`` (full norm)."""
    rule = fine_rule(m.dim)
    xq, _, grads = _at_quadrature(m, rule, uh)
    nc, nq, d = xq.shape
    dg = np.asarray(grad(xq.reshape(-1, d)), dtype=float).reshape(nc, nq, d)
    if grads is not None:
        dg = dg - grads[:, None, :]
    semi = np.sum(m.measures[:, None] * rule.weights * np.sum(dg ** 2, axis=2))
    return float(np.sqrt(semi + l2_error(m, g, uh) ** 2))


def l2_norm_fn(m: Mesh, g) -> float:
    return l2_error(m, g)


def h1_norm_fn(m: Mesh, g, grad) -> float:
    return h1_error(m, g, grad)


def h1_stability_ratio(m: Mesh, g, grad) -> float:
    """``||pi_h g||_{H^1} / ||g||_{H^1}`` for ``g`` in H^1_0."""
    denom = h1_norm_fn(m, g, grad)
    if denom == 0.0:
        raise ValueError("stability ratio undefined for the zero function")
    return h1_norm(l2_project(m, g)) / denom


def hm1_error_surrogate(m: Mesh, g, uh: FeFunction, refinements: int = 2) -> float:
    """Discrete dual norm of ``g - uh`` over V_h of a refined mesh."""
    fine = m
    for _ in range(refinements):
        fine = refine_uniform(fine)
    free_f = fine.free_vertices
    F = integrate_against_hats(fine, g)[free_f]
    P = prolongation(m, fine)
    F -= (assemble_mass(fine, restrict=False).csr @ (P @ uh.full()))[free_f]
    return dual_norm_h(fine, F)
