"""Norms of embeddings between weighted tensor spaces of different flavors.

For two flavors I and II on the same Sobolev space and weights ``eta``,
``gamma`` the identity map from ``H(K_s^{eta, II})`` into ``H(K_s^{gamma, I})``
has a norm that is estimated here from below by Rayleigh quotients on a
spline subspace.  Tensor-product bases turn the ``s``-variate generalized
eigenproblem into a Kronecker product of univariate ones, so the full
tensor basis is handled exactly through univariate eigenvalues.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import DiscretizationError, DomainError, UnsupportedSpaceError
from .univariate_spaces import (
    NormFlavor,
    SampledFunction,
    SplineBasis,
    UnivariateSpace,
    seminorm_grams,
    seminorms,
)
from .weights import WeightSequence

__all__ = [
    "EmbeddingProblem",
    "SweepRow",
    "univariate_embedding_norm",
    "embedding_norm_lower",
    "uniform_bound_sweep",
    "defective_norm_counterexample",
]


@dataclass(frozen=True)
class EmbeddingProblem:
    """Embedding of ``H(K_s^{source_weights, source})`` into ``H(K_s^{target_weights, target})``."""

    target: UnivariateSpace
    target_weights: WeightSequence
    source: UnivariateSpace
    source_weights: WeightSequence
    s: int
    resolution: int = 64

    def __post_init__(self) -> None:
        if self.target.r != self.source.r:
            raise DomainError("both sides need the same smoothness")
        if self.s < 1:
            raise DomainError("s must be positive")
        if "Korobov" in (self.target.kind, self.source.kind) and self.target.kind != self.source.kind:
            raise UnsupportedSpaceError("Korobov norms are only comparable with Korobov norms")


def _shared_basis(space_a: UnivariateSpace, space_b: UnivariateSpace, resolution: int) -> SplineBasis:
    anchors = [s.anchor for s in (space_a, space_b) if s.anchor is not None]
    degree = max(space_a.spline_degree, space_b.spline_degree)
    return SplineBasis(resolution, degree, space_a.r, anchors)


def _weighted_gram(space: UnivariateSpace, basis: SplineBasis, gamma: float) -> np.ndarray:
    g1, g2 = seminorm_grams(space, basis)
    return g1 + g2 / gamma


def _max_eig(a: np.ndarray, b: np.ndarray) -> float:
    try:
        vals = sla.eigh(a, b, eigvals_only=True)
    except np.linalg.LinAlgError:
        raise DiscretizationError("indefinite source Gram matrix") from None
    return float(vals[-1])


def _korobov_ratio(target: UnivariateSpace, gamma: float, source: UnivariateSpace, eta: float) -> float:
    # both Gram matrices are diagonal in the Fourier basis: ratios per frequency
    # h = 0 gives 1, h != 0 gives (omega_h / gamma) / (omega_h / eta)
    return max(1.0, eta / gamma)


def univariate_embedding_norm(
    target: UnivariateSpace, gamma: float, source: UnivariateSpace, eta: float, resolution: int = 64
) -> float:
    """Lower bound for the norm of ``H(1 + k_{eta, source}) -> H(1 + k_{gamma, target})``."""
    if target.kind == "Korobov" and source.kind == "Korobov":
        return math.sqrt(_korobov_ratio(target, gamma, source, eta))
    basis = _shared_basis(target, source, resolution)
    lam = _max_eig(_weighted_gram(target, basis, gamma), _weighted_gram(source, basis, eta))
    return math.sqrt(max(lam, 0.0))


def embedding_norm_lower(problem: EmbeddingProblem, dense: bool = False) -> float:
    """``sqrt(lambda_max)`` of ``A v = lambda B v`` on a tensor spline basis.

    ``A`` and ``B`` are the Gram matrices of the target and source norms.
    Both are Kronecker products of univariate Gram matrices, so the largest
    eigenvalue is the product of the univariate ones.  ``dense=True`` forms
    the Kronecker matrices explicitly (``s <= 2`` only) as a cross-check.
    """
    p = problem
    gam = p.target_weights.first(p.s)
    eta = p.source_weights.first(p.s)
    if dense:
        if p.s > 2:
            raise DomainError("dense tensor eigenproblems are limited to s <= 2")
        if p.target.kind == "Korobov":
            raise UnsupportedSpaceError("dense cross-check uses the spline basis")
        basis = _shared_basis(p.target, p.source, p.resolution)
        a = np.ones((1, 1))
        b = np.ones((1, 1))
        for g, e in zip(gam, eta):
            a = np.kron(a, _weighted_gram(p.target, basis, g))
            b = np.kron(b, _weighted_gram(p.source, basis, e))
        return math.sqrt(_max_eig(a, b))
    total = 1.0
    for g, e in zip(gam, eta):
        total *= univariate_embedding_norm(p.target, float(g), p.source, float(e), p.resolution) ** 2
    return math.sqrt(total)


@dataclass(frozen=True)
class SweepRow:
    s: int
    norm_fwd_c0: float
    norm_inv_c0inv: float
    norm_fwd_c0inv: float
    norm_inv_c0: float
    budget: float

    def norms(self) -> tuple[float, float, float, float]:
        return (self.norm_fwd_c0, self.norm_inv_c0inv, self.norm_fwd_c0inv, self.norm_inv_c0)


def uniform_bound_sweep(
    flavor_i: NormFlavor,
    flavor_ii: NormFlavor,
    r: int,
    weights: WeightSequence,
    c0: float,
    s_max: int,
    resolution: int = 64,
) -> list[SweepRow]:
    """The four embedding norms for ``s = 1 .. s_max``.

    Columns, with I the target flavor and II the source flavor:

    * ``norm_fwd_c0``: II with ``c0 gamma`` into I with ``gamma``;
    * ``norm_inv_c0inv``: I with ``gamma`` into II with ``gamma / c0``;
    * ``norm_fwd_c0inv``: II with ``gamma`` into I with ``gamma / c0``;
    * ``norm_inv_c0``: I with ``c0 gamma`` into II with ``gamma``.

    ``budget`` is ``prod_j (1 + gamma_j)**(1/2)`` over all coordinates.
    """
    if not 0 < c0 <= 1:
        raise DomainError("c0 must lie in (0, 1]")
    space_i = UnivariateSpace(flavor_i, r)
    space_ii = UnivariateSpace(flavor_ii, r)
    budget = weights.embedding_budget(math.inf)
    gam = weights.first(s_max)
    factors = np.ones((s_max, 4))
    for j, g in enumerate(gam):
        g = float(g)
        factors[j] = [
            univariate_embedding_norm(space_i, g, space_ii, c0 * g, resolution),
            univariate_embedding_norm(space_ii, g / c0, space_i, g, resolution),
            univariate_embedding_norm(space_i, g / c0, space_ii, g, resolution),
            univariate_embedding_norm(space_ii, g, space_i, c0 * g, resolution),
        ]
    running = np.cumprod(factors, axis=0)
    return [SweepRow(s + 1, *map(float, running[s]), budget) for s in range(s_max)]


def defective_norm_counterexample(r: int, weights: WeightSequence, s: int) -> tuple[float, float]:
    """Norm products of ``f(x) = prod_j sqrt(3) x_j`` for the Standard pair and its defective variant.

    ``lhs`` uses ``norm2**2 = ||f^(r)||**2`` only, ``rhs`` the full Standard
    ``norm2``.  For ``r >= 2`` one gets ``lhs = 1`` and
    ``rhs = prod_j (1 + 3 / gamma_j)``.
    """
    if r < 2:
        raise DomainError("the counterexample needs r >= 2")
    if s < 1:
        raise DomainError("s must be positive")
    space = UnivariateSpace(NormFlavor.standard(), r)
    f = SampledFunction.from_polynomial([0.0, math.sqrt(3.0)], degree=max(r, 3))
    n1, n2 = seminorms(space, f)
    n1_sq = round(n1 * n1, 12)
    n2_sq = round(n2 * n2, 12)
    top_sq = round(f.l2_squared(r), 12)
    gam = weights.first(s)
    lhs = float(np.prod(n1_sq + top_sq / gam))
    rhs = float(np.prod(n1_sq + n2_sq / gam))
    return lhs, rhs
