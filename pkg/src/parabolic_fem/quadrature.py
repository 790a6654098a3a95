"""Quadrature rules on the reference simplex, in barycentric coordinates.

Weights are normalized to sum to one; multiply by the cell measure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["QuadratureRule", "gauss_segment", "triangle_midpoint",
           "triangle_degree5", "assembly_rule", "fine_rule", "subdivision"]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray  # (n_points, dim + 1) barycentric
    weights: np.ndarray
    degree: int

    def __post_init__(self):
        if np.any(self.weights <= 0.0):
            raise ValueError("quadrature weights must be positive")
        if abs(self.weights.sum() - 1.0) > 1e-14:
            raise ValueError("quadrature weights must sum to 1")


def gauss_segment(n_points: int) -> QuadratureRule:
    s, w = np.polynomial.legendre.leggauss(n_points)
    lam = 0.5 * (1.0 + s)
    return QuadratureRule(np.column_stack([1.0 - lam, lam]), 0.5 * w,
                          2 * n_points - 1)


def triangle_midpoint() -> QuadratureRule:
    pts = np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]])
    return QuadratureRule(pts, np.full(3, 1.0 / 3.0), 2)


def triangle_degree5() -> QuadratureRule:
    """Seven-point rule of Radon, exact through degree five."""
    r15 = np.sqrt(15.0)
    a1 = (6.0 - r15) / 21.0
    a2 = (6.0 + r15) / 21.0
    w1 = (155.0 - r15) / 1200.0
    w2 = (155.0 + r15) / 1200.0
    pts = [[1 / 3, 1 / 3, 1 / 3]]
    wts = [9.0 / 40.0]
    for a, w in ((a1, w1), (a2, w2)):
        b = 1.0 - 2.0 * a
        pts += [[b, a, a], [a, b, a], [a, a, b]]
        wts += [w] * 3
    wts = np.array(wts)
    return QuadratureRule(np.array(pts), wts / wts.sum(), 5)


def assembly_rule(dim: int) -> QuadratureRule:
    """Rule used for P1 x P1 element integrals (degree 2 or better).

    All points are interior, so a coefficient that jumps across cell
    edges is sampled on the correct side.
    """
    return gauss_segment(2) if dim == 1 else triangle_degree5()


def subdivision(dim: int, n_sub: int = 4):
    """Barycentric vertices of the children of a uniformly split simplex.

    Returns an array ``(n_children, dim + 1, dim + 1)``: for each child,
    the barycentric coordinates (w.r.t. the parent) of its vertices.
    In 1D the segment is cut into ``n_sub`` pieces; in 2D one red
    refinement step gives four children.
    """
    if dim == 1:
        t = np.linspace(0.0, 1.0, n_sub + 1)
        a = np.column_stack([1.0 - t[:-1], t[:-1]])
        b = np.column_stack([1.0 - t[1:], t[1:]])
        return np.stack([a, b], axis=1)
    e = np.eye(3)
    m01, m12, m20 = 0.5 * (e[0] + e[1]), 0.5 * (e[1] + e[2]), 0.5 * (e[2] + e[0])
    return np.array([[e[0], m01, m20], [m01, e[1], m12],
                     [m20, m12, e[2]], [m01, m12, m20]])


def fine_rule(dim: int) -> QuadratureRule:
    """Composite degree-5 rule on the subdivided reference simplex.

    Used wherever a continuous function has to be integrated against
    P1 functions to high accuracy.
    """
    base = gauss_segment(3) if dim == 1 else triangle_degree5()
    children = subdivision(dim)
    pts = np.einsum("qk,ckj->cqj", base.points, children).reshape(-1, dim + 1)
    wts = np.tile(base.weights, len(children)) / len(children)
    return QuadratureRule(pts, wts, 5)
