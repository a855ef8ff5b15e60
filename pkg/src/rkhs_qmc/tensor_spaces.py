"""Tensor-product kernels, interpolation norms and product integrands.

``ProductKernel`` evaluates ``K_s(x, y) = prod_{j <= s} (1 + k_{gamma_j}(x_j, y_j))``
on ``[0, 1]^s``.  With ``s = inf`` points are ``SequencePoint`` objects: a
finite prefix followed by a constant tail value, and the product is
truncated once the remaining factors are negligible.

``ProductFunction`` holds integrands ``f(x) = prod_j f_j(x_j)`` whose
factors are univariate test functions; for homogeneous flavors such
functions split into components ``f_u`` with explicitly computable norms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.linalg as sla

from .errors import DiscretizationError, DomainError, UnsupportedSpaceError
from .univariate_spaces import UnivariateSpace, seminorms
from .weights import WeightSequence

__all__ = [
    "SequencePoint",
    "ProductKernel",
    "GramSystem",
    "ProductFunction",
    "rkhs_norm",
    "decompose",
    "integrate_exact",
    "cylinder_isometry_check",
    "l1_embedding_norm",
    "l1_embedding_check",
]

_TRUNCATION_TOL = 1e-12
_MAX_TRUNCATION = 1 << 20


@dataclass(frozen=True)
class SequencePoint:
    """Point of ``[0, 1]^N``: explicit prefix, then ``tail`` forever."""

    prefix: tuple[float, ...]
    tail: float

    def __post_init__(self) -> None:
        coords = np.asarray(self.prefix + (self.tail,), dtype=float)
        if np.any(coords < 0) or np.any(coords > 1) or np.any(np.isnan(coords)):
            raise DomainError("sequence point coordinates must lie in [0, 1]")

    def coordinates(self, length: int) -> np.ndarray:
        """The first ``length`` coordinates."""
        out = np.full(length, self.tail, dtype=float)
        m = min(length, len(self.prefix))
        out[:m] = self.prefix[:m]
        return out


class ProductKernel:
    """Weighted product kernel ``prod_j (constant + k_{gamma_j})``.

    Parameters
    ----------
    space : UnivariateSpace
    weights : WeightSequence
    s : int or math.inf
    constant : float
        1 for the kernels of the weighted spaces; 0 gives the pure
        interaction kernel ``prod_j k_{gamma_j}`` used for components.
    tol : float
        Truncation tolerance on the remaining log-product for ``s = inf``.
    """

    def __init__(
        self,
        space: UnivariateSpace,
        weights: WeightSequence,
        s: int | float,
        constant: float = 1.0,
        tol: float = _TRUNCATION_TOL,
    ):
        if not (s == math.inf or (int(s) == s and s >= 0)):
            raise DomainError("s must be a nonnegative integer or inf")
        if s == math.inf and not space.homogeneous:
            raise UnsupportedSpaceError("infinite products need a homogeneous flavor")
        self.space = space
        self.weights = weights
        self.s = s if s == math.inf else int(s)
        self.constant = float(constant)
        self.tol = tol

    @property
    def finite(self) -> bool:
        return self.s != math.inf

    def gammas(self, count: int) -> np.ndarray:
        return self.weights.first(count)

    def restricted(self, s: int) -> "ProductKernel":
        return ProductKernel(self.space, self.weights, s, self.constant, self.tol)

    def rescaled(self, factor: float) -> "ProductKernel":
        return ProductKernel(self.space, self.weights.scaled(factor), self.s, self.constant, self.tol)

    # -- factor-level helpers --------------------------------------------

    def factor(self, j: int, x, y) -> np.ndarray:
        """``constant + k_{gamma_j}(x, y)`` for coordinate ``j`` (1-based)."""
        return self.constant + self.space.kernel(self.weights.weight(j), x, y)

    def factor_mean(self, j: int, x) -> np.ndarray:
        return self.constant + self.space.kernel_mean(self.weights.weight(j), x)

    def factor_double_integral(self, j: int) -> float:
        return self.constant + self.space.kernel_double_integral(self.weights.weight(j))

    # -- evaluation ---------------------------------------------------------

    def _tail_length(self, tail: float, start: int) -> tuple[int, float]:
        """Truncation index and remaining log-bound for the diagonal tail factors."""
        diag = float(self.space.kernel(1.0, tail, tail))
        if diag == 0.0:
            return start, 0.0
        budget = self.tol / diag
        n = max(start, self.weights.truncation_index(budget))
        if n >= _MAX_TRUNCATION:
            raise DomainError("point is not in the domain: tail product does not converge")
        return n, diag * self.weights.tail_sum(n)

    def eval(self, x, y) -> np.ndarray | float:
        """``K(x, y)``; finite ``s``: arrays with trailing dimension ``s``."""
        if not self.finite:
            return self._eval_sequence(x, y)
        x = np.asarray(x, dtype=float)
        y = np.asarray(y, dtype=float)
        if x.shape[-1] != self.s or y.shape[-1] != self.s:
            raise DomainError(f"points must have {self.s} coordinates")
        out = np.ones(np.broadcast_shapes(x.shape[:-1], y.shape[:-1]))
        for j in range(self.s):
            out = out * self.factor(j + 1, x[..., j], y[..., j])
        return out

    def _eval_sequence(self, x: SequencePoint, y: SequencePoint) -> float:
        if not isinstance(x, SequencePoint) or not isinstance(y, SequencePoint):
            raise DomainError("infinite products need SequencePoint arguments")
        head = max(len(x.prefix), len(y.prefix))
        same_tail = x.tail == y.tail
        if same_tail:
            length, _ = self._tail_length(x.tail, head)
        else:
            # mixed tails: k(t, t') need not vanish, use the larger diagonal bound
            lx, _ = self._tail_length(x.tail, head)
            ly, _ = self._tail_length(y.tail, head)
            length = max(lx, ly)
        xs, ys = x.coordinates(length), y.coordinates(length)
        gam = self.gammas(length)
        vals = self.constant + np.array(
            [float(self.space.kernel(g, a, b)) for g, a, b in zip(gam[:head], xs[:head], ys[:head])]
        )
        if length > head:
            tail_vals = self.constant + gam[head:] * self.space.kernel(1.0, xs[head:], ys[head:])
            vals = np.r_[vals, tail_vals]
        return float(np.prod(vals))

    def gram(self, points, others=None) -> np.ndarray:
        """Kernel matrix ``[K(p_i, q_k)]`` (finite ``s``: arrays of shape ``(n, s)``)."""
        if not self.finite:
            others = points if others is None else others
            return np.array([[self._eval_sequence(p, q) for q in others] for p in points])
        p = np.atleast_2d(np.asarray(points, dtype=float))
        q = p if others is None else np.atleast_2d(np.asarray(others, dtype=float))
        out = np.ones((p.shape[0], q.shape[0]))
        for j in range(self.s):
            out *= self.factor(j + 1, p[:, j][:, None], q[:, j][None, :])
        return out

    def mean(self, points) -> np.ndarray:
        """``int K(p, y) dy`` for each point (finite ``s``)."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(p.shape[0])
        for j in range(self.s):
            out *= self.factor_mean(j + 1, p[:, j])
        return out

    def double_integral(self) -> float:
        """``int int K``; its square root is the norm of the integration functional."""
        if not self.finite:
            raise DomainError("use a finite truncation for double integrals")
        return float(np.prod([self.factor_double_integral(j + 1) for j in range(self.s)]))

    def integration_norm(self) -> float:
        return math.sqrt(self.double_integral())


class GramSystem:
    """Factored kernel matrix at a fixed design.

    The Cholesky factorization is retried with diagonal jitter
    ``1e-12 * trace / n`` (times 10 per retry, at most three retries).
    """

    def __init__(self, kernel: ProductKernel, points):
        self.kernel = kernel
        self.points = points
        g = kernel.gram(points)
        if not np.allclose(g, g.T, rtol=1e-12, atol=1e-14):
            raise DiscretizationError("kernel matrix is not symmetric")
        self.matrix = 0.5 * (g + g.T)
        n = self.matrix.shape[0]
        jitter = 0.0
        base = 1e-12 * np.trace(self.matrix) / max(n, 1)
        for attempt in range(4):
            try:
                self._chol = sla.cho_factor(self.matrix + jitter * np.eye(n), lower=True)
                break
            except np.linalg.LinAlgError:
                jitter = base * 10**attempt
        else:
            raise DiscretizationError("kernel matrix is singular")
        self.jitter = jitter

    def solve(self, values) -> np.ndarray:
        v = np.asarray(values, dtype=float)
        c = sla.cho_solve(self._chol, v)
        res = np.linalg.norm(self.matrix @ c - v)
        scale = np.linalg.norm(self.matrix) * np.linalg.norm(c) + np.linalg.norm(v)
        if scale > 0 and res > 1e-8 * scale:
            raise DiscretizationError("Gram solve residual too large")
        return c

    def norm(self, values) -> float:
        """``sqrt(v^T G^{-1} v)``."""
        v = np.asarray(values, dtype=float)
        return math.sqrt(max(float(v @ self.solve(v)), 0.0))


def rkhs_norm(kernel: ProductKernel, points, values) -> float:
    """Norm of the minimal-norm interpolant of ``values`` at ``points``."""
    return GramSystem(kernel, points).norm(values)


# ---------------------------------------------------------------------------
# product integrands
# ---------------------------------------------------------------------------


@dataclass
class ProductFunction:
    """``f(x) = prod_j f_j(x_j)`` with ``f_j`` univariate test functions.

    ``factors`` lists ``f_1 .. f_p``.  Beyond ``p`` the factors come from
    ``extension(j)`` when given and are identically 1 otherwise.
    ``extension_at(js, x)``, when given, returns ``f_j(x)`` for an array of
    indices ``js`` beyond ``p`` and a scalar ``x``; it makes long tails of
    point evaluations cheap.
    """

    factors: Sequence
    extension: Callable[[int], object] | None = None
    extension_at: Callable[[np.ndarray, float], np.ndarray] | None = None
    _cache: dict = field(default_factory=dict, repr=False)
    _tails: dict = field(default_factory=dict, repr=False)

    @property
    def prefix_length(self) -> int:
        return len(self.factors)

    @property
    def infinite(self) -> bool:
        return self.extension is not None

    def factor(self, j: int):
        """The ``j``-th factor (1-based); ``None`` stands for the constant 1."""
        if j <= len(self.factors):
            return self.factors[j - 1]
        if self.extension is None:
            return None
        if j not in self._cache:
            self._cache[j] = self.extension(j)
        return self._cache[j]

    def factor_values(self, j: int, x) -> np.ndarray:
        f = self.factor(j)
        x = np.asarray(x, dtype=float)
        return np.ones_like(x) if f is None else np.asarray(f(x), dtype=float)

    def __call__(self, points, tail: float = 0.0, truncation: int | None = None) -> np.ndarray:
        """Evaluate at points of ``[0,1]^d``; coordinates beyond ``d`` equal ``tail``."""
        p = np.atleast_2d(np.asarray(points, dtype=float))
        out = np.ones(p.shape[0])
        for j in range(p.shape[1]):
            out *= self.factor_values(j + 1, p[:, j])
        out *= self.point_tail(p.shape[1], tail, truncation)
        return out

    def point_tail(self, start: int, x: float, truncation: int | None = None) -> float:
        """``prod_{j > start} f_j(x)``."""
        key = (start, float(x), truncation)
        if key not in self._tails:
            if self.extension_at is None or self.extension is None:
                value = self.tail_product(start, lambda f: float(f(x)), truncation)
            else:
                last = len(self.factors)
                value = 1.0
                for j in range(start + 1, last + 1):
                    value *= float(self.factors[j - 1](x))
                limit = truncation if truncation is not None else 1 << 20
                js = np.arange(max(start, last) + 1, limit + 1)
                if js.size:
                    value *= float(np.exp(np.sum(np.log(self.extension_at(js, float(x))))))
            self._tails[key] = value
        return self._tails[key]

    def tail_product(self, start: int, functional, truncation: int | None = None, tol: float = 1e-15) -> float:
        """``prod_{j > start} functional(f_j)``, truncated once factors are within ``tol`` of 1."""
        total = 1.0
        last = len(self.factors)
        for j in range(start + 1, last + 1):
            total *= functional(self.factors[j - 1])
        if self.extension is None:
            return total
        limit = truncation if truncation is not None else 1 << 16
        quiet = 0
        for j in range(max(start, last) + 1, limit + 1):
            value = functional(self.factor(j))
            total *= value
            quiet = quiet + 1 if abs(value - 1.0) < tol else 0
            if quiet >= 64:
                break
        return total


def _component_data(space: UnivariateSpace, f: ProductFunction, s: int):
    xis, norms2 = [], []
    for j in range(1, s + 1):
        fj = f.factor(j)
        if fj is None:
            xis.append(1.0)
            norms2.append(0.0)
            continue
        xi = space.xi(fj)
        _, n2 = seminorms(space, fj)
        xis.append(xi)
        norms2.append(n2)
    return np.array(xis), np.array(norms2)


def decompose(kernel: ProductKernel, f: ProductFunction, rtol: float = 1e-6) -> dict[frozenset, float]:
    """Norms ``||f_u||_{k_u}`` of the components of a product function.

    With ``g_j = f_j - xi(f_j)`` the component is
    ``f_u = prod_{j in u} g_j * prod_{j not in u} xi(f_j)``.  The identity
    ``sum_u ||f_u||**2 / gamma_u = ||f||**2`` is checked before returning.
    """
    space = kernel.space
    if not space.homogeneous:
        raise UnsupportedSpaceError("the Standard flavor has no component decomposition of this form")
    if not kernel.finite or kernel.s > 20:
        raise DomainError("decompose needs a finite s <= 20")
    s = kernel.s
    xis, n2 = _component_data(space, f, s)
    gam = kernel.gammas(s)
    masks = np.arange(1 << s)
    bits = (masks[:, None] >> np.arange(s)[None, :]) & 1
    comp = np.prod(np.where(bits == 1, n2[None, :], np.abs(xis)[None, :]), axis=1)
    gamma_u = np.prod(np.where(bits == 1, gam[None, :], 1.0), axis=1)
    total = float(np.sum(comp**2 / gamma_u))
    direct = float(np.prod(xis**2 + n2**2 / gam))
    if not math.isclose(total, direct, rel_tol=rtol, abs_tol=1e-300):
        raise DiscretizationError("component norms violate the sum-of-norms identity")
    return {frozenset(int(j) + 1 for j in np.flatnonzero(row)): float(c) for row, c in zip(bits, comp)}


def product_norm(kernel: ProductKernel, f: ProductFunction) -> float:
    """``prod_j (norm1(f_j)**2 + norm2(f_j)**2 / gamma_j)**(1/2)`` over the first ``s`` factors."""
    total = 1.0
    for j in range(1, kernel.s + 1):
        fj = f.factor(j)
        if fj is None:
            continue
        n1, n2 = seminorms(kernel.space, fj)
        total *= n1 * n1 + n2 * n2 / kernel.weights.weight(j)
    return math.sqrt(total)


def integrate_exact(kernel: ProductKernel, f: ProductFunction, truncation: int | None = None) -> float:
    """``prod_j int f_j`` (factors beyond the prefix contribute 1 or their own integrals)."""

    def integral(g) -> float:
        return 1.0 if g is None else float(np.real(g.integral()))

    if kernel.finite:
        return float(np.prod([integral(f.factor(j)) for j in range(1, kernel.s + 1)]))
    return f.tail_product(0, integral, truncation)


# ---------------------------------------------------------------------------
# appendix-style checks
# ---------------------------------------------------------------------------


def _tail_factor(kernel: ProductKernel, j: int, tail: float | None) -> float:
    """Diagonal factor contributed by coordinate ``j`` of a padded design."""
    g = kernel.weights.weight(j)
    space = kernel.space
    if tail is None:
        # pad with the functional xi itself: point value at the anchor, mean otherwise
        if space.kind == "Anchored":
            return kernel.constant + float(space.kernel(g, space.anchor, space.anchor))
        return kernel.constant + space.kernel_double_integral(g)
    return kernel.constant + float(space.kernel(g, tail, tail))


def cylinder_isometry_check(
    kernel: ProductKernel,
    points,
    values,
    levels: Sequence[int] = (16, 32, 64),
    tol: float = 1e-4,
    tail: float | None = None,
) -> tuple[bool, list[float], float]:
    """Compare ``||f||_{K_s}`` with the norm of ``f(x_1..x_s)`` in truncated ``K_inf``.

    ``f`` is the minimal-norm interpolant of ``values`` at ``points`` in
    ``[0,1]^s``.  Its extension to sequences is represented on a padded
    design whose extra coordinates carry ``tail`` (``None`` pads with the
    functional ``xi``, i.e. the anchor for the Anchored flavor and the mean
    otherwise).  Returns ``(passed, norms_per_level, norm_s)``.
    """
    if not kernel.space.homogeneous or not kernel.finite:
        raise UnsupportedSpaceError("isometry check needs a homogeneous flavor and finite s")
    norm_s = rkhs_norm(kernel, points, values)
    norms = []
    for level in levels:
        if level < kernel.s:
            raise DomainError("truncation level below s")
        # padded Gram matrix = (product of tail factors) * Gram matrix in s dimensions
        scale = float(np.prod([_tail_factor(kernel, j, tail) for j in range(kernel.s + 1, level + 1)]))
        norms.append(norm_s / math.sqrt(scale))
    gaps = [abs(a - b) for a, b in zip(norms, norms[1:])]
    cauchy = all(g2 <= g1 + 1e-15 for g1, g2 in zip(gaps, gaps[1:]))
    passed = abs(norms[-1] - norm_s) <= tol * max(norm_s, 1.0) and cauchy
    return passed, norms, norm_s


def l1_embedding_norm(space: UnivariateSpace, gamma: float, grid: int = 512, restarts: int = 8, seed: int = 0) -> float:
    """Estimate ``sup int|f| / ||f||`` over ``H(1 + k_gamma)``.

    The supremum equals ``sup_{|sigma| <= 1} (int int (1+k) sigma sigma)**(1/2)``;
    it is approximated on a midpoint grid by sign iteration from several starts.
    """
    y = (np.arange(grid) + 0.5) / grid
    k = (1.0 + space.kernel(gamma, y[:, None], y[None, :])) / grid**2
    rng = np.random.default_rng(seed)
    starts = [np.ones(grid)] + [rng.choice([-1.0, 1.0], grid) for _ in range(restarts - 1)]
    best = 0.0
    for sigma in starts:
        for _ in range(200):
            new = np.where(k @ sigma >= 0, 1.0, -1.0)
            if np.array_equal(new, sigma):
                break
            sigma = new
        best = max(best, float(sigma @ k @ sigma))
    return math.sqrt(best)


def l1_embedding_check(
    kernel: ProductKernel, trials: int = 16, seed: int = 0, samples: int = 100_000, centers: int = 6
) -> tuple[float, float, float]:
    """Largest observed ``int|f| / ||f||_{K_s}`` over random interpolants and its bound.

    Returns ``(max_ratio, bound, sigma)`` where ``bound = (pi/2)**((s-1)/2) *
    prod_j ||i_j||`` and ``sigma`` is the Monte Carlo standard error of the
    maximal ratio.
    """
    if not kernel.finite or kernel.s > 3:
        raise DomainError("l1 check supports s <= 3")
    if not kernel.space.homogeneous:
        raise UnsupportedSpaceError("l1 check needs a homogeneous flavor")
    s = kernel.s
    rng = np.random.default_rng(seed)
    factors = [l1_embedding_norm(kernel.space, kernel.weights.weight(j)) for j in range(1, s + 1)]
    bound = (math.pi / 2) ** ((s - 1) / 2) * float(np.prod(factors))
    sample = rng.random((samples, s))
    best, best_sigma = 0.0, 0.0
    for trial in range(trials):
        if trial == 0:
            # the constant function
            vals, norm = np.ones(samples), 1.0
        else:
            pts = rng.random((centers, s))
            coef = rng.standard_normal(centers)
            norm = math.sqrt(max(float(coef @ kernel.gram(pts) @ coef), 1e-300))
            vals = kernel.gram(sample, pts) @ coef
        absvals = np.abs(vals)
        ratio = float(absvals.mean()) / norm
        sigma = float(absvals.std(ddof=1)) / math.sqrt(samples) / norm
        if ratio > best:
            best, best_sigma = ratio, sigma
    return best, bound, best_sigma
