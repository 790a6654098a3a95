"""Catalog of test problems.

Every problem has a separable exact solution and a load defined by the
weak recipe ``<f, v> = (u', v) + a(u, v; t)``, so solution and data are
consistent by construction.

=================  ====================================================
name               problem
=================  ====================================================
``smooth1d``       ``sin(pi x) sin(t)`` on (0, 1), heat equation, T = 1
``smooth2d``       ``sin(pi x1) sin(pi x2) sin(t)`` on (0, 1)^2, T = 1
``spectral-p2``    rough Fourier series, temporal frequencies n^2 pi
``spectral-p32``   rough Fourier series, temporal frequencies n^1.5 pi
``checkerboard``   diffusion 1 / eps by quadrant on (-1, 1)^2, T = 1/2
=================  ====================================================
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import mpmath
import numpy as np

from .assembly import CoefficientField
from .exact import (CallableFields, PointwiseLoad, SeparableSolution,
                    SineModes1D, TimeFactors, WeakRecipeLoad)
from .mesh import Mesh, build_interval_mesh, build_square_mesh, refine_uniform

__all__ = [
    "ProblemSpec",
    "SpectralSeries",
    "make_smooth_1d",
    "make_smooth_2d",
    "make_spectral",
    "make_checkerboard",
    "get_problem",
    "PROBLEM_NAMES",
    "UnknownProblemError",
]


class UnknownProblemError(KeyError):
    pass


def _zero(x):
    return np.zeros(x.shape[0])


@dataclass(eq=False)
class ProblemSpec:
    """A parabolic initial-boundary value problem with known solution.

    ``base_mesh`` builds the coarsest mesh of a refinement study; level
    ``k`` is that mesh refined ``k`` times.
    """

    name: str
    dim: int
    box: tuple[float, float]
    T: float
    coeff: CoefficientField
    load: object
    u0: Callable
    exact: SeparableSolution | None
    base_mesh: Callable[[], Mesh]
    pointwise_load: PointwiseLoad | None = None
    declared_norms: dict = field(default_factory=dict)
    series: SpectralSeries | None = None

    def mesh(self, level: int = 0) -> Mesh:
        m = self.base_mesh()
        for _ in range(level):
            m = refine_uniform(m)
        return m


def make_smooth_1d() -> ProblemSpec:
    coeff = CoefficientField.constant_coefficients(a=1.0)
    exact = SeparableSolution(TimeFactors.sines([1.0]), SineModes1D([1]))

    def f(x, t):
        return np.sin(np.pi * x[:, 0]) * (np.cos(t) + np.pi ** 2 * np.sin(t))

    return ProblemSpec(
        name="smooth1d", dim=1, box=(0.0, 1.0), T=1.0, coeff=coeff,
        load=WeakRecipeLoad(exact, coeff), u0=_zero, exact=exact,
        base_mesh=lambda: build_interval_mesh(8, 0.0, 1.0),
        pointwise_load=PointwiseLoad(f))


def _sin2d(x):
    return np.sin(np.pi * x[:, 0]) * np.sin(np.pi * x[:, 1])


def _sin2d_grad(x):
    s0, s1 = np.sin(np.pi * x[:, 0]), np.sin(np.pi * x[:, 1])
    c0, c1 = np.cos(np.pi * x[:, 0]), np.cos(np.pi * x[:, 1])
    return np.pi * np.column_stack([c0 * s1, s0 * c1])


def make_smooth_2d() -> ProblemSpec:
    coeff = CoefficientField.constant_coefficients(a=1.0)
    exact = SeparableSolution(TimeFactors.sines([1.0]),
                              CallableFields([_sin2d], [_sin2d_grad], dim=2))

    def f(x, t):
        return _sin2d(x) * (np.cos(t) + 2.0 * np.pi ** 2 * np.sin(t))

    return ProblemSpec(
        name="smooth2d", dim=2, box=(0.0, 1.0), T=1.0, coeff=coeff,
        load=WeakRecipeLoad(exact, coeff), u0=_zero, exact=exact,
        base_mesh=lambda: build_square_mesh(4, 0.0, 1.0),
        pointwise_load=PointwiseLoad(f))


# --- rough solutions given by Fourier series ------------------------------

NORM_NAMES = ("L2H2", "dt_L2L2", "dt_L2H1", "ddt_L2Hm1")
TAIL_TOL = 1e-10


@dataclass(frozen=True)
class SpectralSeries:
    """``u = sum_n u_n sin(n pi x) sin(n^p pi t)`` with ``u_n = (1+n^2)^(-5/4-eps)``.

    Norms over ``(0, 1) x (0, 1)`` are sums of per-mode terms
    ``u_n^2 * P(n) * c(n)``, where ``P`` collects the spatial and
    temporal frequency powers and ``c`` the time integral of ``sin^2``
    or ``cos^2``. Seminorms are used for H^2 and full norms for H^1 and
    H^{-1}.
    """

    p: float
    eps: float

    def amplitude(self, n):
        return (1.0 + np.asarray(n, float) ** 2) ** (-1.25 - self.eps)

    def _power(self, name, n, lib=np):
        pi = lib.pi
        w = n ** self.p * pi  # temporal frequency
        k = n * pi
        if name == "L2H2":
            return k ** 4 / 2, False
        if name == "dt_L2L2":
            return w ** 2 / 2, True
        if name == "dt_L2H1":
            return w ** 2 * (1 + k ** 2) / 2, True
        if name == "ddt_L2Hm1":
            return w ** 4 / (2 * (1 + k ** 2)), False
        if name == "dt_L2H3eps":
            return w ** 2 * (1 + k ** 2) ** (3 * self.eps) / 2, True
        raise KeyError(name)

    def converges(self, name) -> bool:
        """Whether the series for ``name`` has a finite sum."""
        # terms decay like n^(-5 - 4 eps + q) with q the growth of the power
        q = {"L2H2": 4.0, "dt_L2L2": 2 * self.p, "dt_L2H1": 2 * self.p + 2,
             "ddt_L2Hm1": 4 * self.p - 2, "dt_L2H3eps": 2 * self.p + 6 * self.eps}[name]
        return -5.0 - 4.0 * self.eps + q < -1.0

    def smooth_terms(self, name, n):
        """Terms with the time integral replaced by its mean value 1/2."""
        n = np.asarray(n, dtype=float)
        power, _ = self._power(name, n)
        return self.amplitude(n) ** 2 * power * 0.5

    def oscillating_terms(self, name, n):
        """Correction from ``int_0^1 sin^2(n^p pi t) dt - 1/2``."""
        n = np.asarray(n, dtype=float)
        if self.p == int(self.p):
            return np.zeros_like(n)  # sin(2 pi n^p) vanishes exactly
        power, is_cos = self._power(name, n)
        w = n ** self.p * np.pi
        corr = np.sin(2.0 * w) / (4.0 * w)
        return self.amplitude(n) ** 2 * power * (corr if is_cos else -corr)

    def partial_sum(self, name, n_terms):
        n = np.arange(1, int(n_terms) + 1, dtype=float)
        return float(np.sum(self.smooth_terms(name, n) + self.oscillating_terms(name, n)))

    def _mp_smooth(self, name):
        eps = mpmath.mpf(self.eps)

        def g(n):
            power, _ = self._power(name, n, lib=mpmath)
            return (1 + n ** 2) ** (-mpmath.mpf(5) / 2 - 2 * eps) * power / 2
        return g

    @lru_cache(maxsize=None)
    def smooth_tail(self, name, n_terms):
        """``sum_{n > n_terms}`` of the smooth terms, by Euler-Maclaurin."""
        # the slowly decaying integral part loses ~20 digits inside sumem
        with mpmath.workdps(60):
            return float(mpmath.sumem(self._mp_smooth(name),
                                      [int(n_terms) + 1, mpmath.inf]))

    def oscillation_tail_bound(self, name, n_terms):
        """Upper bound on ``|sum_{n > n_terms}|`` of the oscillating terms."""
        if self.p == int(self.p):
            return 0.0
        g = self._mp_smooth(name)
        with mpmath.workdps(20):
            bound = mpmath.quad(
                lambda n: g(n) / (2 * mpmath.pi * n ** self.p),
                [int(n_terms), mpmath.inf])
        return float(bound)

    def tail_threshold(self, name, rel_tol=TAIL_TOL):
        """Smallest power of two truncation that certifies ``rel_tol``."""
        n = 64
        value = self.partial_sum(name, n) + self.smooth_tail(name, n)
        while self.oscillation_tail_bound(name, n) > rel_tol * abs(value):
            n *= 2
            if n > 2 ** 26:
                raise RuntimeError(f"cannot certify the tail of {name}")
        return n

    def norm_squared(self, name, n_terms):
        """Declared value of the squared norm, truncated after ``n_terms`` terms.

        Smooth terms beyond the truncation are added back by
        Euler-Maclaurin; the dropped oscillating terms must fall under
        the certified bound, otherwise ``ValueError``.
        """
        if not self.converges(name):
            return float("inf")
        value = self.partial_sum(name, n_terms) + self.smooth_tail(name, n_terms)
        if self.oscillation_tail_bound(name, n_terms) > TAIL_TOL * abs(value):
            raise ValueError(
                f"truncation after {n_terms} terms does not certify the tail of "
                f"{name} to {TAIL_TOL:g}; need at least {self.tail_threshold(name)}")
        return value


def make_spectral(p: float = 2.0, eps: float = 0.05, n_modes: int = 512,
                  n_norm: int | None = None) -> ProblemSpec:
    """Heat equation on (0, 1) whose solution is a truncated rough series.

    ``n_modes`` Fourier modes make up the solution used in simulations.
    Declared norms refer to the full series; ``n_norm`` is the truncation
    of their direct summation, by default the smallest one that
    certifies the tail.
    """
    if p not in (2, 2.0, 1.5):
        raise ValueError(f"temporal exponent must be 2 or 3/2, got {p}")
    if not 0.0 < eps <= 0.25:
        raise ValueError(f"eps must lie in (0, 0.25], got {eps}")
    if n_modes < 1:
        raise ValueError("need at least one mode")
    series = SpectralSeries(float(p), float(eps))
    declared = {}
    for name in NORM_NAMES:
        if not series.converges(name):
            declared[name] = float("inf")
            continue
        n_cert = series.tail_threshold(name)
        n_use = n_cert if n_norm is None else int(n_norm)
        if n_use < n_cert:
            raise ValueError(f"n_norm={n_use} is below the tail-certification "
                             f"threshold {n_cert} for {name}")
        declared[name] = float(np.sqrt(series.norm_squared(name, n_use)))

    n = np.arange(1, n_modes + 1)
    coeff = CoefficientField.constant_coefficients(a=1.0)
    exact = SeparableSolution(
        TimeFactors.sines(n.astype(float) ** p * np.pi, series.amplitude(n)),
        SineModes1D(n))
    label = "spectral-p2" if p == 2 else "spectral-p32"
    spec = ProblemSpec(
        name=label, dim=1, box=(0.0, 1.0), T=1.0, coeff=coeff,
        load=WeakRecipeLoad(exact, coeff), u0=_zero, exact=exact,
        base_mesh=lambda: build_interval_mesh(8, 0.0, 1.0),
        declared_norms=declared, series=series)
    return spec


# --- discontinuous diffusion ----------------------------------------------

def _cb_value(x):
    x1, x2 = x[:, 0], x[:, 1]
    return (1 - x1 ** 2) * (1 - x2 ** 2) * x1 * x2


def _cb_grad(x):
    x1, x2 = x[:, 0], x[:, 1]
    return np.column_stack([(1 - 3 * x1 ** 2) * x2 * (1 - x2 ** 2),
                            (1 - 3 * x2 ** 2) * x1 * (1 - x1 ** 2)])


def checkerboard_coefficient(eps: float) -> CoefficientField:
    def a(x, t):
        return np.where(x[:, 0] * x[:, 1] > 0.0, 1.0, eps)

    def c(x, t):
        return np.zeros(x.shape[0])

    return CoefficientField(a=a, c=c, a_lower=min(1.0, eps), a_sup=max(1.0, eps))


def make_checkerboard(eps: float = 0.1) -> ProblemSpec:
    """Diffusion 1 where ``x1 x2 > 0`` and ``eps`` elsewhere, on (-1, 1)^2.

    The solution ``sin(t) (1 - x1^2)(1 - x2^2) x1 x2`` vanishes on the
    boundary and on both axes.
    """
    if not 0.0 < eps <= 1.0:
        raise ValueError(f"eps must lie in (0, 1], got {eps}")
    coeff = checkerboard_coefficient(eps)
    exact = SeparableSolution(TimeFactors.sines([1.0]),
                              CallableFields([_cb_value], [_cb_grad], dim=2))
    pointwise = None
    if eps == 1.0:
        def lap(x):
            x1, x2 = x[:, 0], x[:, 1]
            return (-6 * x1 * x2 * (1 - x2 ** 2)) + (-6 * x1 * x2 * (1 - x1 ** 2))

        pointwise = PointwiseLoad(
            lambda x, t: _cb_value(x) * np.cos(t) - lap(x) * np.sin(t))
    return ProblemSpec(
        name="checkerboard", dim=2, box=(-1.0, 1.0), T=0.5, coeff=coeff,
        load=WeakRecipeLoad(exact, coeff), u0=_zero, exact=exact,
        base_mesh=lambda: build_square_mesh(4, -1.0, 1.0, quadrant_aligned=True),
        pointwise_load=pointwise)


PROBLEM_NAMES = ("smooth1d", "smooth2d", "spectral-p2", "spectral-p32", "checkerboard")


def get_problem(name: str, **options) -> ProblemSpec:
    """Look up a catalog problem by name; ``options`` go to its factory."""
    factories = {
        "smooth1d": make_smooth_1d,
        "smooth2d": make_smooth_2d,
        "spectral-p2": lambda **kw: make_spectral(p=2.0, **kw),
        "spectral-p32": lambda **kw: make_spectral(p=1.5, **kw),
        "checkerboard": make_checkerboard,
    }
    try:
        factory = factories[name]
    except KeyError:
        raise UnknownProblemError(
            f"unknown problem {name!r}; choose from {', '.join(PROBLEM_NAMES)}") from None
    return factory(**options)
