"""Separable exact solutions ``u(x, t) = sum_k s_k(t) w_k(x)`` and loads.

Every temporal factor is a sinusoid ``A sin(omega t + phase)``, so
products of factors with each other and with piecewise-linear functions
of time integrate in closed form. That is what makes error norms of
rough, highly oscillatory solutions computable without resolving every
oscillation with quadrature points.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .assembly import (CoefficientField, integrate_against_hats,
                       integrate_gradient_against_hats, quadrature_points)
from .mesh import Mesh
from .quadrature import fine_rule

__all__ = [
    "TimeFactors",
    "FieldFamily",
    "CallableFields",
    "SineModes1D",
    "SeparableSolution",
    "WeakRecipeLoad",
    "PointwiseLoad",
    "interval_integrals",
    "product_integrals",
]


def _sinc(x):
    return np.sinc(np.asarray(x) / np.pi)


def _odd_moment(x):
    """``(sin x - x cos x) / x**3``, stable near zero."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = np.abs(x) < 1e-2
    xs = x[small] ** 2
    out[small] = 1.0 / 3.0 - xs / 30.0 + xs ** 2 / 840.0
    xl = x[~small]
    out[~small] = (np.sin(xl) - xl * np.cos(xl)) / xl ** 3
    return out


def _cos_integral(nu, psi, a, b):
    """``int_a^b cos(nu t + psi) dt`` with broadcasting."""
    h = 0.5 * (b - a)
    m = 0.5 * (a + b)
    return 2.0 * h * np.cos(nu * m + psi) * _sinc(nu * h)


@dataclass(frozen=True)
class TimeFactors:
    """``K`` temporal factors ``amplitude * sin(omega * t + phase)``."""

    amplitude: np.ndarray
    omega: np.ndarray
    phase: np.ndarray

    def __post_init__(self):
        for name in ("amplitude", "omega", "phase"):
            object.__setattr__(self, name,
                               np.atleast_1d(np.asarray(getattr(self, name), float)))

    @classmethod
    def sines(cls, omega, amplitude=1.0):
        omega = np.atleast_1d(np.asarray(omega, float))
        return cls(np.broadcast_to(amplitude, omega.shape).copy(), omega,
                   np.zeros_like(omega))

    def __len__(self):
        return self.omega.size

    def __call__(self, t):
        """Values at ``t``: shape ``(K,)`` for scalar ``t``, else ``(len(t), K)``."""
        t = np.asarray(t, dtype=float)
        return self.amplitude * np.sin(np.multiply.outer(t, self.omega) + self.phase)

    def derivative(self) -> TimeFactors:
        return TimeFactors(self.amplitude * self.omega, self.omega,
                           self.phase + 0.5 * np.pi)


def product_integrals(f: TimeFactors, g: TimeFactors, a: float, b: float):
    """Matrix ``int_a^b f_k(t) g_l(t) dt``, shape ``(len(f), len(g))``."""
    wk, wl = f.omega[:, None], g.omega[None, :]
    pk, pl = f.phase[:, None], g.phase[None, :]
    amp = np.outer(f.amplitude, g.amplitude)
    diff = _cos_integral(wk - wl, pk - pl, a, b)
    summ = _cos_integral(wk + wl, pk + pl, a, b)
    return 0.5 * amp * (diff - summ)


def interval_integrals(f: TimeFactors, times):
    """Per-interval moments of the factors against the linear hats in time.

    For the grid ``times`` (length ``N + 1``) returns ``(I0, I1)`` with
    shape ``(N, K)``: ``I0[n, k] = int s_k(t) (t^{n+1} - t)/tau_n dt`` and
    ``I1[n, k] = int s_k(t) (t - t^n)/tau_n dt`` over ``[t^n, t^{n+1}]``.
    """
    times = np.asarray(times, dtype=float)
    a = times[:-1, None]
    b = times[1:, None]
    h = 0.5 * (b - a)
    m = 0.5 * (a + b)
    theta = m * f.omega + f.phase
    x = f.omega * h
    full = 2.0 * h * np.sin(theta) * _sinc(x)
    odd = np.cos(theta) * 2.0 * h ** 3 * _odd_moment(x) * f.omega
    # int (t - m) sin(omega t + phase) dt = cos(theta) * 2 h^3 g(omega h) * omega
    first = 0.5 * full
    tilt = odd / (2.0 * h)
    I1 = f.amplitude * (first + tilt)
    I0 = f.amplitude * (first - tilt)
    return I0, I1


class FieldFamily:
    """``K`` spatial fields with values, gradients and moments against hats.

    Subclasses implement ``values`` and ``grads``; the moment methods fall
    back on the fine composite quadrature of :mod:`.quadrature`.
    """

    dim: int
    size: int

    def values(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def grads(self, x):  # pragma: no cover - interface
        raise NotImplementedError

    def mass_moments(self, m: Mesh):
        """``(w_k, phi_i)`` for every vertex, shape ``(n_vertices, K)``."""
        return integrate_against_hats(m, self.values)

    def form_moments(self, m: Mesh, coeff: CoefficientField, t: float):
        """``a(w_k, phi_i; t)`` for every vertex, shape ``(n_vertices, K)``."""
        out = integrate_gradient_against_hats(
            m, self.grads, weight=lambda x: coeff.sample(x, t)[0])
        const = coeff.constant
        if const is not None and const[1] is None:
            if const[2]:
                out = out + const[2] * self.mass_moments(m)
            return out

        def lower(x):
            _, b, c = coeff.sample(x, t)
            val = c[:, None] * self.values(x)
            if b is not None:
                val = val + np.einsum("nd,nkd->nk", b, self.grads(x))
            return val

        return out + integrate_against_hats(m, lower)

    def h1_moments(self, m: Mesh):
        """``(w_k, phi_i)_{H^1}`` for every vertex."""
        return integrate_gradient_against_hats(m, self.grads) + self.mass_moments(m)

    def gram(self, m: Mesh):
        """L^2 and H^1 Gram matrices of the fields over the meshed domain."""
        rule = fine_rule(m.dim)
        xq = quadrature_points(m, rule)
        nc, nq, d = xq.shape
        pts = xq.reshape(-1, d)
        w = (m.measures[:, None] * rule.weights[None, :]).ravel()
        v = self.values(pts).reshape(nc * nq, -1)
        g = self.grads(pts).reshape(nc * nq, -1, d)
        l2 = (v * w[:, None]).T @ v
        semi = sum((g[:, :, i] * w[:, None]).T @ g[:, :, i] for i in range(d))
        return l2, l2 + semi


class CallableFields(FieldFamily):
    """Fields given by vectorized callables.

    ``value_fns[k](x)`` returns shape ``(n,)`` and ``grad_fns[k](x)``
    shape ``(n, dim)``.
    """

    def __init__(self, value_fns, grad_fns, dim):
        self.value_fns = list(value_fns)
        self.grad_fns = list(grad_fns)
        self.dim = dim
        self.size = len(self.value_fns)

    def values(self, x):
        return np.stack([f(x) for f in self.value_fns], axis=-1)

    def grads(self, x):
        return np.stack([g(x) for g in self.grad_fns], axis=1)


class SineModes1D(FieldFamily):
    """``w_k(x) = sin(n_k pi x)`` on ``(0, 1)``, with exact moments."""

    dim = 1

    def __init__(self, modes):
        self.modes = np.asarray(modes, dtype=float)
        self.k = np.pi * self.modes
        self.size = self.modes.size

    def values(self, x):
        return np.sin(np.multiply.outer(np.asarray(x)[:, 0], self.k))

    def grads(self, x):
        return (self.k * np.cos(np.multiply.outer(np.asarray(x)[:, 0], self.k)))[:, :, None]

    def mass_moments(self, m: Mesh):
        xa = m.vertices[m.cells[:, 0], 0][:, None]
        xb = m.vertices[m.cells[:, 1], 0][:, None]
        hh = 0.5 * (xb - xa)
        theta = 0.5 * (xa + xb) * self.k
        full = 2.0 * hh * np.sin(theta) * _sinc(self.k * hh)
        tilt = np.cos(theta) * hh ** 2 * _odd_moment(self.k * hh) * self.k
        out = np.zeros((m.n_vertices, self.size))
        np.add.at(out, m.cells[:, 0], 0.5 * full - tilt)
        np.add.at(out, m.cells[:, 1], 0.5 * full + tilt)
        return out

    def _is_unit_interval(self, m):
        return m.dim == 1 and m.box == (0.0, 1.0)

    def h1_moments(self, m: Mesh):
        if not self._is_unit_interval(m):
            return super().h1_moments(m)
        # integration by parts, plus the boundary term w'(x) phi_i(x) at x = 0, 1
        out = (1.0 + self.k ** 2) * self.mass_moments(m)
        x = m.vertices[:, 0]
        out[x == 0.0] -= self.k
        out[x == 1.0] += self.k * np.cos(self.k)
        return out

    def form_moments(self, m: Mesh, coeff: CoefficientField, t: float):
        const = coeff.constant
        if const is None or const[1] is not None or not self._is_unit_interval(m):
            return super().form_moments(m, coeff, t)
        a0, _, c0 = const
        mass = self.mass_moments(m)
        return a0 * (self.h1_moments(m) - mass) + c0 * mass

    def gram(self, m: Mesh):
        if not self._is_unit_interval(m):
            return super().gram(m)
        l2 = 0.5 * np.eye(self.size) * (self.modes[:, None] == self.modes[None, :])
        return l2, (1.0 + self.k ** 2)[:, None] * l2


@dataclass(frozen=True, eq=False)
class SeparableSolution:
    """``u(x, t) = sum_k time_k(t) * space_k(x)``."""

    time: TimeFactors
    space: FieldFamily

    def __post_init__(self):
        if len(self.time) != self.space.size:
            raise ValueError("time and space factor counts differ")

    def __call__(self, x, t):
        return self.space.values(x) @ self.time(t)

    def dt(self, x, t):
        return self.space.values(x) @ self.time.derivative()(t)

    def grad(self, x, t):
        return np.einsum("nkd,k->nd", self.space.grads(x), self.time(t))


class WeakRecipeLoad:
    """Load defined through a chosen solution: ``<f, v> = (u', v) + a(u, v; t)``.

    Only ever forms moments against test functions, so discontinuous
    coefficients never produce interface terms.
    """

    def __init__(self, solution: SeparableSolution, coeff: CoefficientField):
        self.solution = solution
        self.coeff = coeff

    def basis(self, m: Mesh, t: float = 0.0):
        """Free-vertex matrices ``(L_mass, L_form)``: ``F(t) = L_mass s'(t) + L_form s(t)``."""
        if self.coeff.time_dependent:
            return _weak_basis_uncached(self, m, t)
        return _weak_basis(self, m)

    def assemble(self, m: Mesh, t: float) -> np.ndarray:
        L_mass, L_form = self.basis(m, t)
        ds = self.solution.time.derivative()(t)
        return L_mass @ ds + L_form @ self.solution.time(t)

    def assemble_many(self, m: Mesh, times) -> np.ndarray:
        """Load vectors at every time, shape ``(n_free, len(times))``."""
        times = np.asarray(times, dtype=float)
        if self.coeff.time_dependent:
            return np.column_stack([self.assemble(m, t) for t in times])
        L_mass, L_form = self.basis(m)
        S = self.solution.time(times)
        dS = self.solution.time.derivative()(times)
        return L_mass @ dS.T + L_form @ S.T


def _weak_basis_uncached(load, m, t):
    free = m.free_vertices
    L_mass = load.solution.space.mass_moments(m)[free]
    L_form = load.solution.space.form_moments(m, load.coeff, t)[free]
    return L_mass, L_form


@lru_cache(maxsize=32)
def _weak_basis(load, m):
    return _weak_basis_uncached(load, m, 0.0)


class PointwiseLoad:
    """Load given as a function ``f(x, t)`` integrated by fine quadrature."""

    def __init__(self, fn):
        self.fn = fn

    def assemble(self, m: Mesh, t: float) -> np.ndarray:
        return integrate_against_hats(m, lambda x: self.fn(x, t))[m.free_vertices]

    def assemble_many(self, m: Mesh, times) -> np.ndarray:
        return np.column_stack([self.assemble(m, t) for t in times])
