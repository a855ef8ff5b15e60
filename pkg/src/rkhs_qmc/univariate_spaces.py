"""Univariate function spaces on [0, 1] and their weighted kernels.

Every space carries a pair of seminorms ``(norm1, norm2)`` with
``norm1(1) = 1`` and ``norm2(1) = 0``.  For a weight ``gamma > 0`` the kernel
``1 + k_gamma`` reproduces the norm

    ||f||**2 = norm1(f)**2 + norm2(f)**2 / gamma.

Four flavors are supported:

``Standard``
    ``norm1 = ||f||_L2`` and ``norm2**2 = sum_{nu=1..r} ||f^(nu)||_L2**2``.
``Anchored(a)``
    ``norm1 = |f(a)|`` and ``norm2**2 = sum_{nu<r} |f^(nu)(a)|**2 + ||f^(r)||**2``.
``ANOVA``
    ``norm1 = |int f|`` and ``norm2**2 = sum_{nu<r} |int f^(nu)|**2 + ||f^(r)||**2``.
``Korobov``
    periodic functions with ``norm1 = |fhat(0)|`` and
    ``norm2**2 = sum_{h != 0} |fhat(h)|**2 * max(1, |h|**(2r))``.

The last three families are homogeneous, ``k_gamma = gamma * k_1``, and have
closed forms.  The Standard family is not homogeneous; it is evaluated with
a Galerkin construction in a B-spline basis (plus a hyperbolic closed form
for ``r = 1``).
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla
from numpy.polynomial.legendre import leggauss
from scipy.interpolate import BSpline, make_interp_spline
from scipy.special import bernoulli, comb

from .errors import DiscretizationError, DomainError, UnsupportedSpaceError

__all__ = [
    "NormFlavor",
    "UnivariateSpace",
    "SampledFunction",
    "FourierFunction",
    "SplineBasis",
    "GalerkinKernel",
    "seminorms",
    "kernel_eval",
    "kernel_mean",
    "kernel_double_integral",
    "galerkin_kernel",
    "fourier_kernel",
    "equivalence_constant",
    "bernoulli_polynomial",
]

FLAVORS = ("Standard", "Anchored", "ANOVA", "Korobov")
HOMOGENEOUS = ("Anchored", "ANOVA", "Korobov")

_DOMAIN_TOL = 1e-12
_SNAP_TOL = 1e-10


# ---------------------------------------------------------------------------
# flavors and spaces
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NormFlavor:
    """Which pair of seminorms is used; ``anchor`` only for Anchored."""

    kind: str
    anchor: float | None = None

    def __post_init__(self) -> None:
        if self.kind not in FLAVORS:
            raise UnsupportedSpaceError(f"unknown flavor {self.kind!r}")
        if (self.kind == "Anchored") != (self.anchor is not None):
            raise DomainError("an anchor is required for (and only for) the Anchored flavor")
        if self.anchor is not None and not 0.0 <= self.anchor <= 1.0:
            raise DomainError("anchor must lie in [0, 1]")

    @classmethod
    def standard(cls) -> "NormFlavor":
        return cls("Standard")

    @classmethod
    def anchored(cls, anchor: float = 0.0) -> "NormFlavor":
        return cls("Anchored", float(anchor))

    @classmethod
    def anova(cls) -> "NormFlavor":
        return cls("ANOVA")

    @classmethod
    def korobov(cls) -> "NormFlavor":
        return cls("Korobov")

    @classmethod
    def parse(cls, text: str) -> "NormFlavor":
        """Parse ``standard``, ``anova``, ``korobov``, ``anchored`` or ``anchored:0.5``."""
        name, _, arg = text.strip().partition(":")
        name = name.lower()
        if name in ("standard", "s"):
            return cls.standard()
        if name in ("anchored", "anchor"):
            return cls.anchored(float(arg) if arg else 0.0)
        if name == "anova":
            return cls.anova()
        if name == "korobov":
            return cls.korobov()
        raise UnsupportedSpaceError(f"unknown flavor {text!r}")

    def __str__(self) -> str:
        if self.kind == "Anchored":
            return f"Anchored({self.anchor:g})"
        return self.kind


@dataclass(frozen=True)
class UnivariateSpace:
    """Sobolev-type space of smoothness ``r`` on [0, 1] with a norm flavor.

    ``galerkin_resolution`` is the number of uniform intervals of the spline
    basis used by the numerical oracle.
    """

    flavor: NormFlavor
    r: int = 1
    galerkin_resolution: int = 512

    def __post_init__(self) -> None:
        if int(self.r) != self.r or self.r < 1:
            raise UnsupportedSpaceError("smoothness r must be a positive integer")
        if self.galerkin_resolution < 4:
            raise DomainError("galerkin_resolution must be at least 4")

    @property
    def kind(self) -> str:
        return self.flavor.kind

    @property
    def anchor(self) -> float | None:
        return self.flavor.anchor

    @property
    def homogeneous(self) -> bool:
        """True when ``k_gamma = gamma * k_1``."""
        return self.kind in HOMOGENEOUS

    @property
    def spline_degree(self) -> int:
        return max(self.r, 3)

    def with_resolution(self, resolution: int) -> "UnivariateSpace":
        return UnivariateSpace(self.flavor, self.r, resolution)

    def default_tail(self) -> float:
        """Coordinate value whose kernel diagonal is smallest (anchor or 0)."""
        return self.anchor if self.anchor is not None else 0.0

    # convenience wrappers around the module-level operations
    def kernel(self, gamma: float, x, y) -> np.ndarray:
        return kernel_eval(self, gamma, x, y)

    def kernel_mean(self, gamma: float, x) -> np.ndarray:
        return kernel_mean(self, gamma, x)

    def kernel_double_integral(self, gamma: float) -> float:
        return kernel_double_integral(self, gamma)

    def xi(self, f: "SampledFunction | FourierFunction") -> float:
        """The functional behind ``norm1`` (point value, mean or zeroth coefficient)."""
        if self.kind == "Anchored":
            return float(f(self.anchor))
        if self.kind in ("ANOVA", "Korobov", "Standard"):
            return float(np.real(f.integral()))
        raise UnsupportedSpaceError(self.kind)

    def __str__(self) -> str:
        return f"{self.flavor}, r={self.r}"


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------


def _gauss_on_intervals(breaks: np.ndarray, order: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on every nonempty interval of ``breaks``."""
    xi, wi = leggauss(order)
    lo, hi = breaks[:-1], breaks[1:]
    keep = hi > lo
    lo, hi = lo[keep], hi[keep]
    half = 0.5 * (hi - lo)
    nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * xi[None, :]
    weights = half[:, None] * wi[None, :]
    return nodes.ravel(), weights.ravel()


class SampledFunction:
    """Piecewise polynomial on [0, 1] stored as a clamped B-spline.

    Evaluation, differentiation and integration are exact for the
    representation (products of pieces are integrated with Gauss rules of
    sufficient order).
    """

    def __init__(self, spline: BSpline):
        t = np.asarray(spline.t)
        k = spline.k
        if not (np.isclose(t[0], 0.0) and np.isclose(t[-1], 1.0)):
            raise DomainError("spline must be defined on [0, 1]")
        if np.any(t[: k + 1] != t[0]) or np.any(t[-k - 1 :] != t[-1]):
            raise DomainError("spline knots must be clamped")
        self.spline = spline

    # constructors ---------------------------------------------------------

    @classmethod
    def from_polynomial(cls, coeffs: Sequence[float], degree: int | None = None) -> "SampledFunction":
        """Exact representation of ``sum_i coeffs[i] * x**i``."""
        coeffs = np.asarray(coeffs, dtype=float)
        k = max(len(coeffs) - 1, 0) if degree is None else int(degree)
        if k < len(coeffs) - 1:
            raise DomainError("degree too low for the polynomial")
        k = max(k, 1)
        t = np.r_[np.zeros(k + 1), np.ones(k + 1)]
        x = np.linspace(0.0, 1.0, k + 1)
        y = np.polynomial.polynomial.polyval(x, coeffs)
        return cls(make_interp_spline(x, y, k=k, t=t))

    @classmethod
    def constant(cls, value: float = 1.0, degree: int = 3) -> "SampledFunction":
        return cls.from_polynomial([value], degree=degree)

    @classmethod
    def from_callable(cls, func, intervals: int = 64, degree: int = 3) -> "SampledFunction":
        """Spline interpolant of ``func`` (uniform knots, not-a-knot ends)."""
        x = np.linspace(0.0, 1.0, intervals * degree + 1)
        return cls(make_interp_spline(x, func(x), k=degree))

    @classmethod
    def random(
        cls, rng: np.random.Generator, intervals: int = 8, degree: int = 3, scale: float = 1.0
    ) -> "SampledFunction":
        """Spline with uniform knots and i.i.d. normal coefficients."""
        interior = np.linspace(0.0, 1.0, intervals + 1)[1:-1]
        t = np.r_[np.zeros(degree + 1), interior, np.ones(degree + 1)]
        c = scale * rng.standard_normal(len(t) - degree - 1)
        return cls(BSpline(t, c, degree))

    # evaluation -------------------------------------------------------------

    @property
    def degree(self) -> int:
        return self.spline.k

    @property
    def breakpoints(self) -> np.ndarray:
        return np.unique(self.spline.t)

    def __call__(self, x, nu: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if nu > self.degree:
            return np.zeros_like(x)
        return self.spline(x, nu=nu)

    def integral(self, nu: int = 0) -> float:
        """``int_0^1 f^(nu)``."""
        if nu == 0:
            return float(self.spline.integrate(0.0, 1.0))
        return float(self(1.0, nu - 1) - self(0.0, nu - 1))

    def l2_squared(self, nu: int = 0) -> float:
        """``int_0^1 |f^(nu)|**2`` computed exactly piece by piece."""
        if nu > self.degree:
            return 0.0
        nodes, weights = _gauss_on_intervals(self.breakpoints, self.degree + 1)
        values = self(nodes, nu)
        return float(np.dot(weights, values * values))

    def __add__(self, other: "SampledFunction") -> "SampledFunction":
        if not isinstance(other, SampledFunction):
            return NotImplemented
        if self.degree != other.degree or not np.array_equal(self.spline.t, other.spline.t):
            raise DomainError("only splines on the same knot vector can be added")
        return SampledFunction(BSpline(self.spline.t, self.spline.c + other.spline.c, self.degree))

    def scaled(self, factor: float) -> "SampledFunction":
        return SampledFunction(BSpline(self.spline.t, factor * self.spline.c, self.degree))

    def shifted(self, offset: float) -> "SampledFunction":
        """``f + offset`` (B-splines form a partition of unity)."""
        return SampledFunction(BSpline(self.spline.t, self.spline.c + offset, self.degree))


class FourierFunction:
    """Trigonometric polynomial ``sum_{|h| <= H} c_h exp(2 pi i h x)``."""

    def __init__(self, coefficients: Sequence[complex]):
        c = np.asarray(coefficients, dtype=complex)
        if c.ndim != 1 or len(c) % 2 != 1:
            raise DomainError("need an odd-length coefficient table indexed -H..H")
        self.coefficients = c
        self.cutoff = len(c) // 2

    @classmethod
    def random(cls, rng: np.random.Generator, cutoff: int = 8, decay: float = 1.0) -> "FourierFunction":
        """Real-valued random trigonometric polynomial."""
        h = np.arange(1, cutoff + 1)
        pos = (rng.standard_normal(cutoff) + 1j * rng.standard_normal(cutoff)) / h**decay
        c0 = rng.standard_normal()
        return cls(np.r_[np.conj(pos[::-1]), c0, pos])

    @property
    def frequencies(self) -> np.ndarray:
        return np.arange(-self.cutoff, self.cutoff + 1)

    def __call__(self, x, nu: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        h = self.frequencies
        c = self.coefficients * (2j * np.pi * h) ** nu
        vals = np.exp(2j * np.pi * np.multiply.outer(x, h)) @ c
        return np.real_if_close(vals, tol=1e6)

    def integral(self) -> complex:
        return complex(self.coefficients[self.cutoff])


# ---------------------------------------------------------------------------
# seminorms
# ---------------------------------------------------------------------------


def korobov_weights(h: np.ndarray, r: int) -> np.ndarray:
    """``omega_h = max(1, |h|**(2r))``."""
    return np.maximum(1.0, np.abs(np.asarray(h, dtype=float)) ** (2 * r))


def seminorms(space: UnivariateSpace, f: SampledFunction | FourierFunction) -> tuple[float, float]:
    """Return ``(norm1(f), norm2(f))`` for the flavor of ``space``."""
    r = space.r
    if space.kind == "Korobov":
        if not isinstance(f, FourierFunction):
            raise UnsupportedSpaceError("Korobov seminorms need a Fourier representation")
        h = f.frequencies
        mask = h != 0
        n2 = float(np.sum(np.abs(f.coefficients[mask]) ** 2 * korobov_weights(h[mask], r)))
        return abs(f.integral()), math.sqrt(n2)
    if not isinstance(f, SampledFunction):
        raise UnsupportedSpaceError(f"{space.kind} seminorms need a spline representation")
    if f.degree < r:
        raise DomainError("spline degree must be at least r")
    if space.kind == "Standard":
        n1 = math.sqrt(f.l2_squared(0))
        n2 = sum(f.l2_squared(nu) for nu in range(1, r + 1))
    elif space.kind == "Anchored":
        a = space.anchor
        n1 = abs(float(f(a)))
        n2 = sum(float(f(a, nu)) ** 2 for nu in range(1, r)) + f.l2_squared(r)
    else:
        n1 = abs(f.integral())
        n2 = sum(f.integral(nu) ** 2 for nu in range(1, r)) + f.l2_squared(r)
    return n1, math.sqrt(n2)


def weighted_norm(space: UnivariateSpace, gamma: float, f) -> float:
    """``sqrt(norm1**2 + norm2**2 / gamma)``, the norm of ``f`` in ``H(1 + k_gamma)``."""
    n1, n2 = seminorms(space, f)
    return math.sqrt(n1 * n1 + n2 * n2 / gamma)


# ---------------------------------------------------------------------------
# closed-form kernels
# ---------------------------------------------------------------------------


@functools.lru_cache(maxsize=None)
def _bernoulli_coeffs(n: int) -> np.ndarray:
    """Ascending coefficients of the Bernoulli polynomial ``B_n``."""
    numbers = bernoulli(n)
    # B_n(x) = sum_k C(n,k) B_k x^(n-k)
    coeffs = np.zeros(n + 1)
    for k in range(n + 1):
        coeffs[n - k] = comb(n, k, exact=True) * numbers[k]
    return coeffs


def bernoulli_polynomial(n: int, x) -> np.ndarray:
    return np.polynomial.polynomial.polyval(np.asarray(x, dtype=float), _bernoulli_coeffs(n))


def _check_unit(*arrays) -> None:
    for a in arrays:
        a = np.asarray(a)
        if a.size and (np.nanmin(a) < -_DOMAIN_TOL or np.nanmax(a) > 1 + _DOMAIN_TOL or np.isnan(a).any()):
            raise DomainError("kernel arguments must lie in [0, 1]")


def _anchored_k1(r: int, a: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    dx, dy = x - a, y - a
    out = np.zeros(np.broadcast(dx, dy).shape)
    fact = 1.0
    for nu in range(1, r):
        fact *= nu
        out = out + (dx * dy) ** nu / fact**2
    u, v = np.abs(dx), np.abs(dy)
    m = np.minimum(u, v)
    same = (dx * dy) > 0
    if r == 1:
        tail = m
    elif r == 2:
        big = np.maximum(u, v)
        tail = big * m * m / 2 - m**3 / 6
    else:
        # int_0^m (u - t)^(r-1) (v - t)^(r-1) dt / ((r-1)!)^2, exact with r nodes
        xi, wi = leggauss(r)
        t = 0.5 * m[..., None] * (xi + 1)
        integrand = ((u[..., None] - t) * (v[..., None] - t)) ** (r - 1)
        tail = 0.5 * m * np.sum(wi * integrand, axis=-1) / math.factorial(r - 1) ** 2
    return out + np.where(same, tail, 0.0)


def _anova_k1(r: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.zeros(np.broadcast(x, y).shape)
    for nu in range(1, r + 1):
        out = out + bernoulli_polynomial(nu, x) * bernoulli_polynomial(nu, y) / math.factorial(nu) ** 2
    sign = 1.0 if r % 2 == 1 else -1.0
    return out + sign * bernoulli_polynomial(2 * r, np.abs(x - y)) / math.factorial(2 * r)


def _korobov_k1(r: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    frac = np.mod(x - y, 1.0)
    sign = 1.0 if r % 2 == 1 else -1.0
    return sign * (2 * np.pi) ** (2 * r) / math.factorial(2 * r) * bernoulli_polynomial(2 * r, frac)


def _standard_r1(gamma: float, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """``1 + k_gamma`` for the Standard norm with r = 1 (Neumann Green's function)."""
    w = math.sqrt(gamma)
    lo, hi = np.minimum(x, y), np.maximum(x, y)
    # cosh(w lo) cosh(w (1 - hi)) * w / sinh(w), written with exponentials for stability
    num = np.cosh(w * lo) * np.cosh(w * (1 - hi))
    return num * w / math.sinh(w)


def unit_kernel(space: UnivariateSpace, x, y) -> np.ndarray:
    """``k_1(x, y)`` for homogeneous flavors (closed forms)."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if space.kind == "Anchored":
        return _anchored_k1(space.r, space.anchor, x, y)
    if space.kind == "ANOVA":
        return _anova_k1(space.r, x, y)
    if space.kind == "Korobov":
        return _korobov_k1(space.r, x, y)
    raise UnsupportedSpaceError("the Standard flavor is not homogeneous")


def kernel_eval(space: UnivariateSpace, gamma: float, x, y) -> np.ndarray:
    """``k_gamma(x, y)`` (broadcasting over array arguments)."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    _check_unit(x, y)
    if space.homogeneous:
        return gamma * unit_kernel(space, x, y)
    if space.r == 1:
        return _standard_r1(gamma, x, y) - 1.0
    return _cached_galerkin(space, float(gamma)).kernel(x, y) - 1.0


def _piecewise_mean(func, x: np.ndarray, breaks: Iterable[float], order: int) -> np.ndarray:
    """``int_0^1 func(x, y) dy`` for piecewise polynomials in ``y``, per entry of ``x``."""
    xi, wi = leggauss(order)
    x = np.asarray(x, dtype=float)
    flat = x.ravel()
    fixed = np.asarray(sorted(set(breaks) | {0.0, 1.0}), dtype=float)
    total = np.zeros_like(flat)
    cuts = np.sort(np.concatenate([np.broadcast_to(fixed, (flat.size, fixed.size)), flat[:, None]], axis=1), axis=1)
    for i in range(cuts.shape[1] - 1):
        lo, hi = cuts[:, i], cuts[:, i + 1]
        half = 0.5 * (hi - lo)
        nodes = (0.5 * (hi + lo))[:, None] + half[:, None] * xi[None, :]
        total += half * np.sum(wi * func(flat[:, None], nodes), axis=1)
    return total.reshape(x.shape)


def kernel_mean(space: UnivariateSpace, gamma: float, x) -> np.ndarray:
    """``int_0^1 k_gamma(x, y) dy``."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    x = np.asarray(x, dtype=float)
    _check_unit(x)
    if space.kind in ("ANOVA", "Korobov", "Standard"):
        # the constant 1 reproduces integration in all three norms
        return np.zeros_like(x)
    order = space.r + 2
    mean = _piecewise_mean(lambda a, b: unit_kernel(space, a, b), x, [space.anchor], order)
    return gamma * mean


def kernel_double_integral(space: UnivariateSpace, gamma: float) -> float:
    """``int int k_gamma(x, y) dx dy``."""
    if not gamma > 0:
        raise DomainError("gamma must be positive")
    if space.kind in ("ANOVA", "Korobov", "Standard"):
        return 0.0
    return gamma * _unit_double_integral(space)


@functools.lru_cache(maxsize=None)
def _unit_double_integral(space: UnivariateSpace) -> float:
    # only the Anchored flavor gets here, and it is homogeneous
    a = space.anchor
    nodes, weights = _gauss_on_intervals(np.array(sorted({0.0, a, 1.0})), 2 * space.r + 4)
    return float(np.dot(weights, kernel_mean(space, 1.0, nodes)))


# ---------------------------------------------------------------------------
# Galerkin oracle
# ---------------------------------------------------------------------------


class SplineBasis:
    """Spline space on [0, 1] parametrized through its ``r``-th derivative.

    A function is written as

        f(x) = sum_{nu < r} c_nu x**nu / nu! + (I**r g)(x),

    where ``g`` is a B-spline of degree ``degree - r`` and ``I`` integrates
    from 0.  This spans the same space as B-splines of degree ``degree`` but
    keeps the Gram matrices of order-``r`` norms well conditioned (the
    top-order term becomes a mass matrix).

    Uniform breakpoints ``j / resolution`` are simple knots.  Additional
    ``junctions`` get the largest multiplicity compatible with ``C^(r-1)``
    continuity of ``f``; this lets the space reproduce the kinks of kernel
    sections exactly.
    """

    def __init__(self, resolution: int, degree: int, r: int, junctions: Iterable[float] = ()):
        self.resolution = int(resolution)
        self.degree = int(degree)
        self.r = int(r)
        if self.degree < self.r:
            raise DomainError("spline degree must be at least r")
        uniform = np.linspace(0.0, 1.0, self.resolution + 1)
        mult = {float(u): 1 for u in uniform[1:-1]}
        kg = self.degree - self.r
        for p in np.asarray(list(junctions), dtype=float).ravel():
            if p <= _SNAP_TOL or p >= 1 - _SNAP_TOL:
                continue
            key = float(p)
            for existing in mult:
                if abs(existing - key) < _SNAP_TOL:
                    key = existing
                    break
            mult[key] = kg + 1
        interior = np.concatenate([np.full(m, b) for b, m in sorted(mult.items())]) if mult else np.zeros(0)
        self.knots = np.r_[np.zeros(kg + 1), interior, np.ones(kg + 1)]
        self.breaks = np.unique(self.knots)
        n_g = len(self.knots) - kg - 1
        self.size = n_g + self.r
        top = BSpline(self.knots, np.eye(n_g), kg, extrapolate=False)
        # antiderivatives I**j g for j = 0..r
        self._primitives = [top]
        for _ in range(self.r):
            self._primitives.append(self._primitives[-1].antiderivative(1))
        self._top = top

    def design(self, x, nu: int = 0) -> np.ndarray:
        """Matrix ``[phi_i^(nu)(x_l)]`` of shape ``(len(x), size)``."""
        x = np.clip(np.atleast_1d(np.asarray(x, dtype=float)), 0.0, 1.0)
        out = np.zeros((x.size, self.size))
        for p in range(nu, self.r):
            out[:, p] = x ** (p - nu) / math.factorial(p - nu)
        if nu <= self.r:
            block = self._primitives[self.r - nu](x)
        elif nu - self.r <= self.degree - self.r:
            block = self._top(x, nu=nu - self.r)
        else:
            block = np.zeros((x.size, self.size - self.r))
        out[:, self.r :] = np.nan_to_num(block)
        return out

    def _quadrature(self) -> tuple[np.ndarray, np.ndarray]:
        return _gauss_on_intervals(self.breaks, self.degree + 1)

    def gram(self, nu: int) -> np.ndarray:
        """``[int phi_i^(nu) phi_j^(nu)]``."""
        nodes, weights = self._quadrature()
        d = self.design(nodes, nu)
        return d.T @ (weights[:, None] * d)

    def integrals(self, nu: int = 0) -> np.ndarray:
        """``[int phi_i^(nu)]``."""
        if nu == 0:
            nodes, weights = self._quadrature()
            return weights @ self.design(nodes, 0)
        return (self.design([1.0], nu - 1) - self.design([0.0], nu - 1))[0]

    def point_values(self, x: float, nu: int = 0) -> np.ndarray:
        return self.design([x], nu)[0]


def seminorm_grams(space: UnivariateSpace, basis: SplineBasis) -> tuple[np.ndarray, np.ndarray]:
    """Gram matrices of the two seminorms in a spline basis."""
    r = space.r
    if basis.degree < r:
        raise DomainError("basis degree must be at least r")
    if space.kind == "Korobov":
        raise UnsupportedSpaceError("Korobov norms use the Fourier basis")
    if space.kind == "Standard":
        g1 = basis.gram(0)
        g2 = sum(basis.gram(nu) for nu in range(1, r + 1))
        return g1, g2
    if space.kind == "Anchored":
        vecs = [basis.point_values(space.anchor, nu) for nu in range(r)]
    else:
        vecs = [basis.integrals(nu) for nu in range(r)]
    g1 = np.outer(vecs[0], vecs[0])
    g2 = basis.gram(r)
    for v in vecs[1:]:
        g2 = g2 + np.outer(v, v)
    return g1, g2


def _factor(matrix: np.ndarray, what: str):
    try:
        return sla.cho_factor(matrix, lower=True)
    except np.linalg.LinAlgError:
        raise DiscretizationError(f"{what}: Gram matrix is not positive definite") from None


class GalerkinKernel:
    """Reproducing kernel of ``norm1**2 + norm2**2 / gamma`` on a spline space.

    Evaluates ``(1 + k_gamma)(x, y) = phi(x)^T A^{-1} phi(y)`` with
    ``A = G1 + G2 / gamma``.  ``junctions`` should contain the points where
    kernel values are requested: the basis is given reduced continuity there.
    """

    def __init__(self, space: UnivariateSpace, gamma: float, junctions: Iterable[float] = ()):
        if space.kind == "Korobov":
            raise UnsupportedSpaceError("use fourier_kernel for the Korobov flavor")
        if not gamma > 0:
            raise DomainError("gamma must be positive")
        self.space = space
        self.gamma = float(gamma)
        points = list(np.asarray(list(junctions), dtype=float).ravel())
        if space.anchor is not None:
            points.append(space.anchor)
        self.basis = SplineBasis(space.galerkin_resolution, space.spline_degree, space.r, points)
        g1, g2 = seminorm_grams(space, self.basis)
        self.system = g1 + g2 / self.gamma
        self._chol = _factor(self.system, "Galerkin kernel")
        self._residual_check()

    def _residual_check(self) -> None:
        rhs = self.basis.integrals(0)
        sol = sla.cho_solve(self._chol, rhs)
        # normwise backward error of the solve
        scale = np.linalg.norm(self.system, 1) * np.linalg.norm(sol, 1) + np.linalg.norm(rhs, 1)
        res = np.linalg.norm(self.system @ sol - rhs, 1) / scale
        if not res < 1e-10:
            raise DiscretizationError(f"Galerkin solve residual {res:.2e} too large")

    def kernel(self, x, y) -> np.ndarray:
        """``(1 + k_gamma)(x, y)`` with broadcasting."""
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        bx, by = np.broadcast_arrays(x, y)
        ux, ix = np.unique(bx.ravel(), return_inverse=True)
        uy, iy = np.unique(by.ravel(), return_inverse=True)
        px = self.basis.design(ux)
        py = self.basis.design(uy)
        table = px @ sla.cho_solve(self._chol, py.T)
        return table[ix, iy].reshape(bx.shape)

    def matrix(self, grid) -> np.ndarray:
        """Full matrix ``[(1 + k_gamma)(g_i, g_j)]``."""
        g = np.asarray(grid, dtype=float).ravel()
        p = self.basis.design(g)
        m = p @ sla.cho_solve(self._chol, p.T)
        return 0.5 * (m + m.T)

    def mean(self, x) -> np.ndarray:
        """``int (1 + k_gamma)(x, y) dy``."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return self.basis.design(x) @ sla.cho_solve(self._chol, self.basis.integrals(0))

    def double_integral(self) -> float:
        m = self.basis.integrals(0)
        return float(m @ sla.cho_solve(self._chol, m))


@functools.lru_cache(maxsize=64)
def _cached_galerkin(space: UnivariateSpace, gamma: float) -> GalerkinKernel:
    return GalerkinKernel(space, gamma)


def fourier_cutoff(r: int, tol: float = 1e-9, cap: int = 2**23) -> int:
    """Smallest cutoff whose truncated tail ``2 sum_{h > H} h**(-2r)`` is below ``tol`` (capped)."""
    return int(min(cap, math.ceil((2.0 / ((2 * r - 1) * tol)) ** (1.0 / (2 * r - 1)))))


def fourier_kernel(r: int, gamma: float, x, y, cutoff: int | None = None, chunk: int = 2**20) -> np.ndarray:
    """Galerkin kernel of the Korobov norm in the Fourier basis ``|h| <= cutoff``.

    Returns ``(1 + k_gamma)(x, y) = 1 + gamma * sum_{0 < |h| <= cutoff} e(h(x-y)) / omega_h``.
    """
    if cutoff is None:
        cutoff = fourier_cutoff(r)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    diff = np.mod(x - y, 1.0)
    flat, inverse = np.unique(diff.ravel(), return_inverse=True)
    acc = np.zeros(flat.size)
    # sum from the smallest terms up for accuracy
    for stop in range(cutoff, 0, -chunk):
        h = np.arange(max(stop - chunk, 0) + 1, stop + 1, dtype=float)[::-1]
        acc += np.cos(2 * np.pi * np.multiply.outer(flat, h)) @ (2.0 / korobov_weights(h, r))
    return (1.0 + gamma * acc)[inverse].reshape(diff.shape)


def galerkin_kernel(space: UnivariateSpace, gamma: float, grid) -> np.ndarray:
    """Numerical oracle: matrix ``[(1 + k_gamma)(g_i, g_j)]`` from a Galerkin solve.

    The grid points are inserted as reduced-continuity knots of the spline
    basis.  For the Korobov flavor the truncated Fourier basis is used.
    """
    g = np.asarray(grid, dtype=float).ravel()
    _check_unit(g)
    if space.kind == "Korobov":
        return fourier_kernel(space.r, gamma, g[:, None], g[None, :])
    oracle = GalerkinKernel(space, gamma, junctions=g)
    if oracle.basis.size < g.size:
        raise DiscretizationError("basis smaller than the grid")
    return oracle.matrix(g)


# ---------------------------------------------------------------------------
# norm equivalence
# ---------------------------------------------------------------------------


def _max_generalized_eig(a: np.ndarray, b: np.ndarray) -> float:
    try:
        vals = sla.eigh(a, b, eigvals_only=True)
    except np.linalg.LinAlgError:
        raise DiscretizationError("generalized eigenproblem failed (indefinite metric)") from None
    return float(vals[-1])


def _constant_direction(space: UnivariateSpace, basis: SplineBasis) -> np.ndarray:
    """Coefficient functional ``f -> <f, 1>_1``."""
    if space.kind == "Anchored":
        return basis.point_values(space.anchor, 0)
    return basis.integrals(0)


def equivalence_constant(
    space_i: UnivariateSpace,
    space_ii: UnivariateSpace,
    resolution: int = 128,
    inflation: float = 1.05,
) -> tuple[float, float]:
    """Feasible constant ``c >= 1`` for the norm-equivalence estimate and ``c0 = 1 / (2 c**4)``.

    ``c`` is the largest of

    * ``sup ||f||_H / sqrt(<f,1>_1**2 + norm2(f)**2)`` for both spaces (an
      admissible constant for ``||f||_H <= c (|<f,1>_1| + norm2(f))``),
    * ``sup ||f||_{H,I} / ||f||_{H,II}`` and its reverse,

    each computed as a generalized eigenvalue on a shared spline basis and
    then multiplied by ``inflation``.
    """
    if space_i.r != space_ii.r:
        raise UnsupportedSpaceError("both spaces need the same smoothness")
    kinds = {space_i.kind, space_ii.kind}
    if "Korobov" in kinds:
        if kinds != {"Korobov"}:
            raise UnsupportedSpaceError("Korobov norms live on the periodic subspace only")
        c = 1.0
        return c, 1.0 / (2 * c**4)
    degree = max(space_i.spline_degree, space_ii.spline_degree)
    anchors = [s.anchor for s in (space_i, space_ii) if s.anchor is not None]
    basis = SplineBasis(resolution, degree, space_i.r, anchors)
    grams = {}
    for tag, space in (("I", space_i), ("II", space_ii)):
        g1, g2 = seminorm_grams(space, basis)
        ell = _constant_direction(space, basis)
        full = g1 + g2
        grams[tag] = full
        lam = _max_generalized_eig(full, np.outer(ell, ell) + g2)
        grams[tag + "_eq2"] = lam
    ratios = [
        grams["I_eq2"],
        grams["II_eq2"],
        _max_generalized_eig(grams["I"], grams["II"]),
        _max_generalized_eig(grams["II"], grams["I"]),
    ]
    c = inflation * math.sqrt(max(1.0, max(ratios)))
    return c, 1.0 / (2 * c**4)
