"""P1 finite element assembly.

Point functions take an array of points ``x`` of shape ``(n_points, dim)``
and return one value per point; time-dependent ones take ``(x, t)``.
All matrices returned here act on the free vertices only (Dirichlet
vertices are eliminated), except where ``restrict=False`` is passed.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .quadrature import QuadratureRule, assembly_rule, fine_rule
from .sparse import SparseMatrix

__all__ = [
    "CoefficientField",
    "CoefficientError",
    "FeFunction",
    "assemble_mass",
    "assemble_stiffness",
    "assemble_form",
    "assemble_h1_matrix",
    "assemble_load",
    "interpolate_nodal",
    "integrate_against_hats",
    "integrate_gradient_against_hats",
    "quadrature_points",
    "barycentric_gradients",
]


class CoefficientError(ValueError):
    """Sampled coefficient data violate the declared bounds."""


def _const(value):
    def fn(x, t):
        return np.full(x.shape[0], float(value))
    return fn


@dataclass(frozen=True)
class CoefficientField:
    """Coefficients of ``-div(a grad u) + b . grad u + c u``.

    ``a`` and ``c`` map ``(x, t)`` to arrays of shape ``(n,)``, ``b`` to
    ``(n, dim)``. ``b=None`` means no convection term. The declared
    bounds ``a_lower``, ``a_sup``, ``b_sup`` and ``c_sup`` feed the
    Garding constants and are checked whenever coefficients are sampled.
    """

    a: Callable
    c: Callable
    a_lower: float
    a_sup: float
    c_sup: float = 0.0
    b: Callable | None = None
    b_sup: float = 0.0
    time_dependent: bool = False
    constant: tuple | None = field(default=None, compare=False)

    @classmethod
    def constant_coefficients(cls, a=1.0, c=0.0, b=None):
        """Space- and time-independent coefficients."""
        b_fn = None
        b_sup = 0.0
        if b is not None:
            b_vec = np.asarray(b, dtype=float)
            b_sup = float(np.linalg.norm(b_vec))

            def b_fn(x, t):
                return np.broadcast_to(b_vec, x.shape).copy()
        return cls(a=_const(a), c=_const(c), a_lower=float(a), a_sup=float(a),
                   c_sup=abs(float(c)), b=b_fn, b_sup=b_sup,
                   constant=(float(a), b, float(c)))

    def garding_constants(self):
        """``(C_a, alpha, eta)`` for continuity and the Garding inequality."""
        cont = self.a_sup + self.b_sup + self.c_sup
        alpha = self.a_lower / 2.0
        eta = (self.a_lower / 2.0 + self.b_sup ** 2 / (2.0 * self.a_lower)
               + self.c_sup)
        return cont, alpha, eta

    def sample(self, x, t):
        """Evaluate ``(a, b, c)`` at points ``x`` and check the bounds."""
        a = np.asarray(self.a(x, t), dtype=float)
        c = np.asarray(self.c(x, t), dtype=float)
        b = None if self.b is None else np.asarray(self.b(x, t), dtype=float)
        slack = 1e-12 * max(1.0, self.a_sup)
        if np.any(a < self.a_lower - slack):
            i = int(np.argmin(a))
            raise CoefficientError(
                f"a({x[i].tolist()}, t={t}) = {a[i]:.6g} is below the "
                f"declared lower bound {self.a_lower:g}")
        if np.any(a > self.a_sup + slack) or np.any(np.abs(c) > self.c_sup + slack):
            raise CoefficientError("sampled a or c exceeds its declared bound")
        if b is not None and np.any(np.linalg.norm(b, axis=-1) > self.b_sup + slack):
            raise CoefficientError("sampled |b| exceeds its declared bound")
        return a, b, c


@dataclass(frozen=True, eq=False)
class FeFunction:
    """Element of V_h: values at the free vertices of ``mesh``."""

    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.mesh.n_free,):
            raise ValueError(f"expected {self.mesh.n_free} free values, "
                             f"got shape {values.shape}")
        object.__setattr__(self, "values", values)

    def full(self) -> np.ndarray:
        """Values on all vertices, zero on the boundary."""
        out = np.zeros(self.mesh.n_vertices)
        out[self.mesh.free_vertices] = self.values
        return out

    def __add__(self, other):
        return FeFunction(self.mesh, self.values + other.values)

    def __sub__(self, other):
        return FeFunction(self.mesh, self.values - other.values)

    def __mul__(self, alpha):
        return FeFunction(self.mesh, float(alpha) * self.values)

    __rmul__ = __mul__

    @classmethod
    def zeros(cls, mesh):
        return cls(mesh, np.zeros(mesh.n_free))


@lru_cache(maxsize=64)
def barycentric_gradients(m: Mesh) -> np.ndarray:
    """Gradients of the barycentric coordinates, shape ``(n_cells, dim+1, dim)``."""
    v = m.vertices[m.cells]
    if m.dim == 1:
        h = v[:, 1, 0] - v[:, 0, 0]
        return np.stack([-1.0 / h, 1.0 / h], axis=1)[:, :, None]
    B = np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]], axis=2)
    Binv = np.linalg.inv(B)  # rows are grad lambda_1, grad lambda_2
    g12 = Binv
    g0 = -g12.sum(axis=1, keepdims=True)
    return np.concatenate([g0, g12], axis=1)


def quadrature_points(m: Mesh, rule: QuadratureRule) -> np.ndarray:
    """Physical quadrature points, shape ``(n_cells, n_points, dim)``."""
    return np.einsum("qk,ckd->cqd", rule.points, m.vertices[m.cells])


def _restrict(m: Mesh, A: sp.spmatrix, restrict: bool) -> SparseMatrix:
    A = A.tocsr()
    if restrict:
        free = m.free_vertices
        A = A[free][:, free]
    return SparseMatrix(A)


def _scatter(m: Mesh, local: np.ndarray) -> sp.csr_matrix:
    k = m.cells.shape[1]
    rows = np.repeat(m.cells, k, axis=1).ravel()
    cols = np.tile(m.cells, (1, k)).ravel()
    return sp.coo_matrix((local.ravel(), (rows, cols)),
                         shape=(m.n_vertices, m.n_vertices)).tocsr()


def _mass_local(m: Mesh) -> np.ndarray:
    k = m.dim + 1
    ref = (np.ones((k, k)) + np.eye(k)) / ((k) * (k + 1))
    return m.measures[:, None, None] * ref


def _stiffness_local(m: Mesh, weight=None) -> np.ndarray:
    G = barycentric_gradients(m)
    local = np.einsum("cid,cjd->cij", G, G) * m.measures[:, None, None]
    if weight is not None:
        local *= weight[:, None, None]
    return local


@lru_cache(maxsize=64)
def _mass_cached(m: Mesh, restrict: bool) -> SparseMatrix:
    return _restrict(m, _scatter(m, _mass_local(m)), restrict)


@lru_cache(maxsize=64)
def _stiffness_cached(m: Mesh, restrict: bool) -> SparseMatrix:
    return _restrict(m, _scatter(m, _stiffness_local(m)), restrict)


def assemble_mass(m: Mesh, restrict: bool = True) -> SparseMatrix:
    """Mass matrix ``(phi_j, phi_i)``, by the exact element formula."""
    return _mass_cached(m, restrict)


def assemble_stiffness(m: Mesh, restrict: bool = True) -> SparseMatrix:
    """Stiffness matrix ``(grad phi_j, grad phi_i)``."""
    return _stiffness_cached(m, restrict)


def assemble_h1_matrix(m: Mesh) -> SparseMatrix:
    """Gram matrix of the H^1 inner product on V_h."""
    return _h1_cached(m)


@lru_cache(maxsize=64)
def _h1_cached(m: Mesh) -> SparseMatrix:
    return assemble_stiffness(m) + assemble_mass(m)


def assemble_form(m: Mesh, coeff: CoefficientField, t: float,
                  restrict: bool = True) -> SparseMatrix:
    """Matrix of ``a(phi_j, phi_i; t)``; row index is the test function."""
    rule = assembly_rule(m.dim)
    xq = quadrature_points(m, rule)
    nc, nq, d = xq.shape
    a, b, c = coeff.sample(xq.reshape(-1, d), t)
    a = a.reshape(nc, nq)
    c = c.reshape(nc, nq)
    lam = rule.points  # (nq, k)
    w = rule.weights
    local = _stiffness_local(m, a @ w)
    local += np.einsum("cq,q,qi,qj->cij", c, w, lam, lam) * m.measures[:, None, None]
    if b is not None:
        G = barycentric_gradients(m)
        b = b.reshape(nc, nq, d)
        bg = np.einsum("cqd,cjd->cqj", b, G)
        local += np.einsum("q,qi,cqj->cij", w, lam, bg) * m.measures[:, None, None]
    return _restrict(m, _scatter(m, local), restrict)


def integrate_against_hats(m: Mesh, fn, rule: QuadratureRule | None = None):
    """``(fn, phi_i)`` for every vertex ``i``.

    ``fn`` maps points ``(n, dim)`` to ``(n,)`` or ``(n, K)``; the result
    has shape ``(n_vertices,)`` or ``(n_vertices, K)``.
    """
    rule = fine_rule(m.dim) if rule is None else rule
    xq = quadrature_points(m, rule)
    nc, nq, d = xq.shape
    vals = np.asarray(fn(xq.reshape(-1, d)), dtype=float)
    squeeze = vals.ndim == 1
    vals = vals.reshape(nc, nq, -1)
    local = np.einsum("cqk,q,qi->cik", vals, rule.weights, rule.points)
    local *= m.measures[:, None, None]
    out = np.zeros((m.n_vertices, vals.shape[2]))
    for i in range(d + 1):
        np.add.at(out, m.cells[:, i], local[:, i])
    return out[:, 0] if squeeze else out


def integrate_gradient_against_hats(m: Mesh, grad_fn, weight=None,
                                    rule: QuadratureRule | None = None):
    """``(weight * grad_fn, grad phi_i)`` for every vertex ``i``.

    ``grad_fn`` maps points to ``(n, dim)`` or ``(n, K, dim)``; ``weight``
    is an optional scalar point function (a diffusion coefficient).
    """
    rule = fine_rule(m.dim) if rule is None else rule
    xq = quadrature_points(m, rule)
    nc, nq, d = xq.shape
    pts = xq.reshape(-1, d)
    g = np.asarray(grad_fn(pts), dtype=float)
    squeeze = g.ndim == 2
    g = g.reshape(nc * nq, -1, d)
    if weight is not None:
        g = g * np.asarray(weight(pts), dtype=float)[:, None, None]
    g = g.reshape(nc, nq, -1, d)
    avg = np.einsum("cqkd,q->ckd", g, rule.weights)
    local = np.einsum("ckd,cid->cik", avg, barycentric_gradients(m))
    local *= m.measures[:, None, None]
    out = np.zeros((m.n_vertices, g.shape[2]))
    for i in range(d + 1):
        np.add.at(out, m.cells[:, i], local[:, i])
    return out[:, 0] if squeeze else out


def assemble_load(m: Mesh, f, t: float) -> np.ndarray:
    """Load vector ``<f(t), phi_i>`` over the free vertices.

    ``f`` is either a pointwise function ``f(x, t)``, integrated with the
    fine composite rule, or any object with an ``assemble(mesh, t)``
    method (see :class:`parabolic_fem.exact.WeakRecipeLoad`).
    """
    if hasattr(f, "assemble"):
        return np.asarray(f.assemble(m, t), dtype=float)
    full = integrate_against_hats(m, lambda x: f(x, t))
    return full[m.free_vertices]


def interpolate_nodal(m: Mesh, g) -> FeFunction:
    """Nodal interpolant of ``g`` (boundary values are discarded)."""
    x = m.vertices[m.free_vertices]
    vals = np.asarray(g(x), dtype=float).reshape(-1)
    if not np.all(np.isfinite(vals)):
        bad = int(np.flatnonzero(~np.isfinite(vals))[0])
        raise ValueError(f"non-finite sample at vertex {x[bad].tolist()}")
    return FeFunction(m, vals)
