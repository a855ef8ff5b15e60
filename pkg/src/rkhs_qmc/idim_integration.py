"""Integration in infinitely many variables.

Cost models charge one function evaluation at a point ``x`` according to
the coordinates of ``x`` that differ from a default value ``a``:

* ``fix``: every node costs ``$(s)`` where ``s`` is the smallest prefix
  length containing all active coordinates of all nodes;
* ``nest``: a node costs ``$(max u)``;
* ``unr``: a node costs ``$(|u|)``.

Algorithms: the multivariate decomposition method (MDM), a multilevel
method over dimension truncations ``s = 2**l``, and fixed subspace
sampling.  All integrands are products ``f(x) = prod_j f_j(x_j)``, whose
decomposition components are available in closed form.

``theoretical_lambda`` returns the known brackets for the best possible
convergence exponents, and ``fit_rate`` estimates exponents from data.
"""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import stats

from .errors import DomainError, HypothesisError, PlanError, UnsupportedSpaceError
from .qmc_rules import (
    PolynomialLattice,
    QuadratureRule,
    RandomizedRuleFamily,
    _keyed,
    cbc_construct,
    owen_scramble,
)
from .tensor_spaces import ProductFunction, ProductKernel, l1_embedding_norm
from .univariate_spaces import SampledFunction, UnivariateSpace
from .weights import WeightSequence, explicit

__all__ = [
    "CostModel",
    "ProvenancedRule",
    "cost",
    "LambdaBracket",
    "theoretical_lambda",
    "MDMPlan",
    "mdm_plan",
    "mdm_integrate",
    "MultilevelPlan",
    "multilevel_plan",
    "multilevel_integrate",
    "fixed_subspace_integrate",
    "IntegrationResult",
    "fit_rate",
    "product_test_integrand",
    "truncation_constant",
]

_MAX_ACTIVE_SETS = 200_000


# ---------------------------------------------------------------------------
# cost models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CostModel:
    """Cost ``$(nu)`` of one evaluation with ``nu`` active coordinates.

    ``growth`` is ``"linear"`` (``1 + nu``), ``"power"`` (``(1 + nu)**sigma``)
    or ``"exp"`` (``exp(sigma * nu)``).
    """

    variant: str = "unr"
    growth: str = "linear"
    sigma: float = 1.0
    anchor: float = 0.0

    def __post_init__(self) -> None:
        if self.variant not in ("fix", "nest", "unr"):
            raise DomainError("cost variant must be fix, nest or unr")
        if self.growth not in ("linear", "power", "exp"):
            raise DomainError("growth must be linear, power or exp")
        if not self.sigma > 0:
            raise DomainError("cost exponent must be positive")
        if not 0.0 <= self.anchor <= 1.0:
            raise DomainError("default value must lie in [0, 1]")

    @classmethod
    def parse(cls, variant: str, growth: str, anchor: float = 0.0) -> "CostModel":
        """``growth`` in the form ``lin``, ``pow:1.5`` or ``exp:0.3``."""
        name, _, arg = growth.partition(":")
        name = {"lin": "linear", "linear": "linear", "pow": "power", "power": "power", "exp": "exp"}.get(name)
        if name is None:
            raise DomainError(f"unknown growth {growth!r}")
        if name == "linear":
            if arg:
                raise DomainError("linear growth takes no parameter")
            return cls(variant, "linear", 1.0, anchor)
        if not arg:
            raise DomainError(f"{name} growth needs a parameter")
        return cls(variant, name, float(arg), anchor)

    def price(self, nu) -> np.ndarray:
        nu = np.asarray(nu, dtype=float)
        if self.growth == "linear":
            return 1.0 + nu
        if self.growth == "power":
            return (1.0 + nu) ** self.sigma
        return np.exp(self.sigma * nu)

    def with_variant(self, variant: str) -> "CostModel":
        return CostModel(variant, self.growth, self.sigma, self.anchor)

    def describe(self) -> str:
        if self.growth == "linear":
            return "lin"
        return f"{'pow' if self.growth == 'power' else 'exp'}:{self.sigma:g}"


@dataclass
class ProvenancedRule:
    """Nodes with the set of coordinates allowed to differ from the default value.

    ``nodes`` has one column per coordinate ``1 .. d``; coordinates beyond
    ``d`` equal the default value.
    """

    nodes: np.ndarray
    weights: np.ndarray
    active_sets: list[frozenset]
    anchor: float = 0.0

    def __post_init__(self) -> None:
        self.nodes = np.atleast_2d(np.asarray(self.nodes, dtype=float))
        self.weights = np.asarray(self.weights, dtype=float).ravel()
        if len(self.active_sets) != self.nodes.shape[0] or self.weights.size != self.nodes.shape[0]:
            raise DomainError("need one active set and one coefficient per node")
        d = self.nodes.shape[1]
        for i, u in enumerate(self.active_sets):
            if any(j < 1 or j > d for j in u):
                raise DomainError("active coordinates must lie in 1..d")
            outside = np.ones(d, dtype=bool)
            outside[[j - 1 for j in u]] = False
            if np.any(self.nodes[i, outside] != self.anchor):
                raise DomainError("coordinates outside the active set must equal the default value")

    @classmethod
    def from_nodes(cls, nodes, weights, anchor: float = 0.0) -> "ProvenancedRule":
        """Active sets inferred as the coordinates that differ from ``anchor``."""
        nodes = np.atleast_2d(np.asarray(nodes, dtype=float))
        sets = [frozenset(int(j) + 1 for j in np.flatnonzero(row != anchor)) for row in nodes]
        return cls(nodes, weights, sets, anchor)

    @property
    def n(self) -> int:
        return self.weights.size


def cost(rule: ProvenancedRule, model: CostModel) -> float:
    """Cost of one application of ``rule`` under ``model``."""
    if rule.anchor != model.anchor:
        raise DomainError("rule and cost model use different default values")
    tops = np.array([max(u) if u else 0 for u in rule.active_sets], dtype=float)
    if model.variant == "fix":
        # summed term by term like the other variants, so the ordering holds in floating point
        return float(np.sum(np.full(rule.n, model.price(tops.max(initial=0.0)))))
    if model.variant == "nest":
        return float(np.sum(model.price(tops)))
    sizes = np.array([len(u) for u in rule.active_sets], dtype=float)
    return float(np.sum(model.price(sizes)))


# ---------------------------------------------------------------------------
# theoretical exponents
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LambdaBracket:
    """Known bounds ``lower <= lambda <= upper`` for a convergence exponent.

    ``open_gap`` marks parameter ranges where the bounds are known not to
    have been shown to match.
    """

    lower: float
    upper: float
    open_gap: bool = False
    result: str = ""

    @property
    def exact(self) -> bool:
        return self.lower == self.upper


def _half_excess(decay: float, sigma: float = 1.0) -> float:
    return math.inf if math.isinf(decay) else (decay - 1.0) / (2.0 * sigma)


def theoretical_lambda(
    setting: str,
    model: str,
    r: float,
    decay: float,
    sigma: float = 1.0,
    growth: str = "power",
    space: str = "sobolev",
) -> LambdaBracket:
    """Bracket for the optimal exponent of integration.

    Parameters
    ----------
    setting : ``"det"`` or ``"ran"``
    model : ``"std"`` (finite ``s``, cost = number of nodes, uniformly in
        ``s``), ``"fix"``, ``"nest"`` or ``"unr"``
    r : smoothness
    decay : decay of the weights (``inf`` allowed)
    sigma, growth : cost function ``$(nu) = (1+nu)**sigma`` (``"power"``) or
        ``exp(sigma nu)`` (``"exp"``)
    space : ``"sobolev"`` (any of the Anchored, ANOVA and Standard norms)
        or ``"korobov"``

    Raises ``HypothesisError`` when no result covers the parameters.
    """
    if setting not in ("det", "ran"):
        raise DomainError("setting must be det or ran")
    if model not in ("std", "fix", "nest", "unr"):
        raise DomainError("model must be std, fix, nest or unr")
    if growth not in ("power", "exp", "linear"):
        raise DomainError("growth must be power, exp or linear")
    if growth == "linear":
        growth, sigma = "power", 1.0
    if not decay >= 1:
        raise HypothesisError("summable weights have decay >= 1")
    if not sigma > 0:
        raise HypothesisError("cost exponent must be positive")

    if space == "korobov":
        if not r > 0.5:
            raise HypothesisError("Korobov smoothness must exceed 1/2")
        if setting != "det" or model != "unr":
            raise HypothesisError("for Korobov spaces only deterministic unrestricted sampling is covered")
        return _unrestricted_det(r, decay, sigma, growth, "korobov-unr-det")
    if space != "sobolev":
        raise DomainError("space must be sobolev or korobov")
    if int(r) != r or r < 1:
        raise HypothesisError("Sobolev smoothness must be a positive integer")
    r = int(r)

    if model == "std":
        top = r if setting == "det" else r + 0.5
        return LambdaBracket(min(decay / 2.0, top), top, result=f"finite-s-{setting}")
    if decay == 1:
        raise HypothesisError("infinite-dimensional results need decay > 1")

    if model == "unr":
        if setting == "det":
            return _unrestricted_det(r, decay, sigma, growth, "sobolev-unr-det")
        _check_unrestricted_cost(sigma, growth)
        value = min(r + 0.5, _half_excess(decay))
        return LambdaBracket(value, value, result="sobolev-unr-ran")

    if model == "nest":
        if growth != "power":
            raise HypothesisError("nested sampling results need $(nu) = Theta(nu**sigma)")
        tail = _half_excess(decay, sigma)
        if setting == "det":
            if sigma < (2 * r - 1) / (2 * r):
                raise HypothesisError("nested deterministic result needs sigma >= (2r-1)/(2r)")
            value = min(r, tail)
            return LambdaBracket(value, value, result="sobolev-nest-det")
        if sigma < 2 * r / (2 * r + 1):
            raise HypothesisError("nested randomized result needs sigma >= 2r/(2r+1)")
        lower = min(max(r, 1.5), tail)
        upper = min(r + 0.5, tail)
        matched = r == 1 or decay <= 2 * sigma * r + 1
        return LambdaBracket(upper if matched else lower, upper, open_gap=not matched, result="sobolev-nest-ran")

    # fixed subspace sampling, randomized, $(k) = k
    if setting != "ran":
        raise HypothesisError("fixed subspace sampling is only covered in the randomized setting")
    if growth != "power" or sigma != 1:
        raise HypothesisError("fixed subspace result assumes a linear cost function")
    if math.isinf(decay):
        beta = r + 0.5
        return LambdaBracket(beta, r + 0.5, result="sobolev-fix-ran")
    beta = 0.5 * min(decay, 2 * r + 1)
    lower = beta * (decay - 1) / (2 * beta - 1 + decay)
    upper = (r + 0.5) * (decay - 1) / (2 * r + decay)
    if decay >= 2 * r + 1:
        lower = upper
    return LambdaBracket(lower, upper, result="sobolev-fix-ran")


def _check_unrestricted_cost(sigma: float, growth: str) -> None:
    # $(nu) = Omega(nu) and $(nu) = O(exp(sigma nu))
    if growth == "power" and sigma < 1:
        raise HypothesisError("unrestricted sampling results need $(nu) = Omega(nu)")


def _unrestricted_det(r: float, decay: float, sigma: float, growth: str, label: str) -> LambdaBracket:
    _check_unrestricted_cost(sigma, growth)
    if decay == 1:
        raise HypothesisError("infinite-dimensional results need decay > 1")
    value = min(r, _half_excess(decay))
    return LambdaBracket(value, value, result=label)


# ---------------------------------------------------------------------------
# test integrands and helpers
# ---------------------------------------------------------------------------


_TEST_SHAPES = {
    # g(0) = 0 and int g = 0
    "balanced": (0.0, 1.0, -1.5),
    # int g = 0 but g(0) = -1/2, so truncation at the default value 0 is biased
    "offset": (-0.5, 1.0, 0.0),
}


def product_test_integrand(weights: WeightSequence, shape: str = "balanced", amplitude: float = 1.0) -> ProductFunction:
    """``f(x) = prod_j (1 + amplitude gamma_j g(x_j))`` with ``int_0^1 g = 0``, so ``I(f) = 1``.

    ``shape="balanced"`` uses ``g(x) = x - 3 x**2 / 2``, which also vanishes at
    0; then the Anchored (at 0) and ANOVA components are both
    ``f_u = prod_{j in u} amplitude gamma_j g``.  ``shape="offset"`` uses
    ``g(x) = x - 1/2``, for which fixing coordinates at 0 changes the integral.
    """
    if shape not in _TEST_SHAPES:
        raise DomainError(f"unknown test shape {shape!r}")
    coeffs = np.array(_TEST_SHAPES[shape])

    def factor(j: int) -> SampledFunction:
        c = amplitude * weights.weight(j)
        return SampledFunction.from_polynomial([1.0 + c * coeffs[0], c * coeffs[1], c * coeffs[2]], degree=3)

    def values(js: np.ndarray, x: float) -> np.ndarray:
        c = amplitude * weights.weights(js)
        return 1.0 + c * (coeffs[0] + x * (coeffs[1] + x * coeffs[2]))

    return ProductFunction([], extension=factor, extension_at=values)


@functools.lru_cache(maxsize=None)
def truncation_constant(space: UnivariateSpace) -> float:
    """``sqrt(pi/2)`` times the estimated L1 embedding norm of ``H(1 + k_1)``."""
    return math.sqrt(math.pi / 2) * l1_embedding_norm(space, 1.0)


class _XiCache:
    """``xi(f_j)`` values of a product integrand, with products over complements."""

    def __init__(self, f: ProductFunction, space: UnivariateSpace, truncation: int = 1 << 16):
        self.f = f
        self.space = space
        self.truncation = truncation
        self._values: dict[int, float] = {}
        self._tails: dict[int, float] = {}

    def xi(self, j: int) -> float:
        if j not in self._values:
            fj = self.f.factor(j)
            self._values[j] = 1.0 if fj is None else self.space.xi(fj)
        return self._values[j]

    def tail(self, start: int) -> float:
        """``prod_{j > start} xi(f_j)``."""
        if start not in self._tails:
            self._tails[start] = self.f.tail_product(start, self._functional, self.truncation)
        return self._tails[start]

    def _functional(self, g) -> float:
        return 1.0 if g is None else self.space.xi(g)

    def complement(self, u: frozenset) -> float:
        top = max(max(u, default=0), self.f.prefix_length)
        head = 1.0
        for j in range(1, top + 1):
            if j not in u:
                head *= self.xi(j)
        return head * self.tail(top)


def _component_values(f: ProductFunction, xi: _XiCache, u: Sequence[int], points: np.ndarray) -> np.ndarray:
    """``f_u`` at points whose columns are the coordinates of ``u`` (in order)."""
    out = np.full(points.shape[0], xi.complement(frozenset(u)))
    for col, j in enumerate(u):
        out *= f.factor_values(j, points[:, col]) - xi.xi(j)
    return out


def _check_product(f) -> None:
    if not isinstance(f, ProductFunction):
        raise DomainError("integrands must be given in product form")


_LATTICES: dict[tuple, PolynomialLattice] = {}


def _lattice(space: UnivariateSpace, weights: WeightSequence, constant: float, s: int, m: int, b: int, criterion: str, interlace_r: int) -> PolynomialLattice:
    # CBC picks coordinates one at a time, so a longer vector serves every shorter s
    key = (space, weights, constant, m, b, criterion, interlace_r)
    known = _LATTICES.get(key)
    if known is None or known.s < s:
        kernel = ProductKernel(space, weights, s, constant=constant)
        known = cbc_construct(b, m, s, kernel, interlace_r=interlace_r, criterion=criterion)
        _LATTICES[key] = known
    if known.s == s:
        return known
    return PolynomialLattice(b, m, known.modulus, known.generating_vector[: s * interlace_r], interlace_r)


def _scrambled_supported(space: UnivariateSpace) -> bool:
    return space.homogeneous and (space.kind != "Anchored" or space.anchor in (0.0, 1.0))


def _rule_nodes(
    space: UnivariateSpace,
    weights: WeightSequence,
    constant: float,
    s: int,
    m: int,
    b: int,
    setting: str,
    seed: int | None,
    key: tuple,
) -> np.ndarray:
    """Nodes of a size-``b**m`` CBC rule in ``s`` dimensions, scrambled for ``ran``."""
    if setting == "ran" and seed is None:
        raise DomainError("randomized algorithms need a seed")
    if m == 0:
        origin = np.zeros((1, s))
        if setting == "det":
            return origin
        return owen_scramble(origin, b, _derived_seed(seed, key), 0)
    interlace_r = space.r if setting == "ran" and space.r > 1 else 1
    criterion = "scrambled" if setting == "ran" and _scrambled_supported(space) else "wce"
    lat = _lattice(space, weights, constant, s, m, b, criterion, interlace_r)
    if setting == "det":
        return lat.rule().nodes
    return RandomizedRuleFamily(lat, "owen", _derived_seed(seed, key)).realization(0).nodes


def _derived_seed(seed: int, key: tuple) -> int:
    return int(_keyed(seed & 0xFFFFFFFFFFFFFFFF, *[int(k) & 0xFFFFFFFFFFFFFFFF for k in key]))


@dataclass(frozen=True)
class IntegrationResult:
    estimate: float
    cost: float
    details: dict = field(default_factory=dict, compare=False)


# ---------------------------------------------------------------------------
# multivariate decomposition method
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MDMPlan:
    """Active sets with per-set rule sizes (powers of ``b``)."""

    sets: tuple[frozenset, ...]
    sizes: tuple[int, ...]
    threshold: float
    budget: float
    model: CostModel
    b: int = 2

    def size(self, u) -> int:
        return self.sizes[self.sets.index(frozenset(u))]

    @property
    def cost(self) -> float:
        return float(sum(n * self.model.price(len(u)) for u, n in zip(self.sets, self.sizes)))

    @property
    def max_order(self) -> int:
        return max(len(u) for u in self.sets)


def _enumerate_sets(scores: np.ndarray, threshold: float, limit: int) -> list[tuple[int, ...]]:
    """All nonempty ``u`` (1-based, increasing) with ``prod_{j in u} scores[j-1] > threshold``.

    ``scores`` must be nonincreasing and eventually below 1.
    """
    boost = np.ones(scores.size + 1)
    # boost[k] = product of the scores > 1 at indices >= k (bounds supersets)
    for k in range(scores.size - 1, -1, -1):
        boost[k] = boost[k + 1] * max(scores[k], 1.0)
    found: list[tuple[int, ...]] = []
    stack: list[tuple[tuple[int, ...], float]] = [((), 1.0)]
    while stack:
        u, value = stack.pop()
        start = u[-1] if u else 0
        for k in range(start, scores.size):
            nxt = value * scores[k]
            if nxt * boost[k + 1] <= threshold:
                if scores[k] <= 1.0:
                    break
                continue
            v = u + (k + 1,)
            if nxt > threshold:
                found.append(v)
                if len(found) > limit:
                    raise PlanError("too many active sets; lower the budget")
            stack.append((v, nxt))
    return found


def _score_vector(weights: WeightSequence, dsq: float, threshold: float) -> np.ndarray:
    """``gamma_j d**2`` for all ``j`` whose single score can exceed ``threshold``."""
    count = 16
    while weights.weight(count) * dsq > threshold:
        count *= 2
        if count > 1 << 22:
            raise PlanError("threshold too small for the weight sequence")
    return weights.first(count) * dsq


def _active_sets(weights: WeightSequence, dsq: float, threshold: float) -> list[frozenset]:
    scores = _score_vector(weights, dsq, threshold)
    sets = [frozenset()] + [frozenset(u) for u in _enumerate_sets(scores, threshold, _MAX_ACTIVE_SETS)]
    return sorted(sets, key=lambda u: (len(u), sorted(u)))


def _fill_budget(sizes: dict, sets: list, target: np.ndarray, prices: np.ndarray, remaining: float, b: int, max_m: int) -> None:
    """Spend what rounding down left over: repeatedly grow the set furthest below its target."""
    left = remaining - sum(sizes[u] * p for u, p in zip(sets, prices))
    cap = b**max_m
    while True:
        best, best_ratio = -1, 0.0
        for k, u in enumerate(sets):
            extra = sizes[u] * (b - 1) * prices[k]
            if extra <= left and sizes[u] < cap and target[k] / sizes[u] > best_ratio:
                best, best_ratio = k, target[k] / sizes[u]
        if best < 0:
            return
        u = sets[best]
        left -= sizes[u] * (b - 1) * prices[best]
        sizes[u] *= b


def mdm_plan(
    weights: WeightSequence,
    space: UnivariateSpace,
    budget: float,
    model: CostModel | None = None,
    rate_hint: float = 1.0,
    b: int = 2,
    max_m: int = 13,
    truncation: float | None = None,
) -> MDMPlan:
    """Active sets ``{u : gamma_u d**(2|u|) > eps**2}`` and per-set sizes.

    ``eps`` is the smallest threshold whose activation cost
    ``sum_u $(|u|)`` fits into half the budget (the empty set is always
    active).  The remaining budget is spread with ``n_u`` proportional to
    ``gamma_u**(1/(rate_hint + 1/2))``, rounded down to powers of ``b``;
    leftovers then go to the sets furthest below their target.
    """
    model = CostModel("unr") if model is None else model
    if model.variant != "unr":
        raise DomainError("the decomposition method is planned under the unr cost model")
    if not space.homogeneous:
        raise UnsupportedSpaceError("the decomposition method needs a homogeneous flavor")
    base_cost = float(model.price(0))
    if budget < base_cost:
        raise PlanError(f"budget {budget} cannot pay for the constant term ({base_cost})")
    d = truncation_constant(space) if truncation is None else float(truncation)
    dsq = d * d
    cap = max(budget / 2.0, base_cost)

    def activation(threshold: float) -> float:
        return float(sum(model.price(len(u)) for u in _active_sets(weights, dsq, threshold)))

    hi = max(float(weights.weight(1)) * dsq, 1.0)
    if activation(hi) > cap:
        threshold = hi
    else:
        lo = hi
        while True:
            lo /= 4.0
            try:
                if activation(lo) > cap:
                    break
            except PlanError:
                break
            hi = lo
        for _ in range(60):
            mid = math.sqrt(lo * hi)
            try:
                ok = activation(mid) <= cap
            except PlanError:
                ok = False
            if ok:
                hi = mid
            else:
                lo = mid
        threshold = hi
    sets = _active_sets(weights, dsq, threshold)
    spent = float(sum(model.price(len(u)) for u in sets))
    if spent > max(cap, base_cost):
        sets = [frozenset()]
        spent = base_cost
    remaining = budget - spent
    others = [u for u in sets if u]
    sizes = {frozenset(): 1}
    if others and remaining > 0:
        share = np.array([weights.set_weight(u) for u in others]) ** (1.0 / (rate_hint + 0.5))
        prices = np.array([float(model.price(len(u))) for u in others])
        target = share * remaining / float(share @ prices)
        for u, t in zip(others, target):
            sizes[u] = b ** int(min(max_m, math.floor(math.log(t, b) + 1e-12))) if t >= 1 else 1
        _fill_budget(sizes, others, target, prices, budget - base_cost, b, max_m)
    else:
        for u in others:
            sizes[u] = 1
    return MDMPlan(tuple(sets), tuple(sizes[u] for u in sets), threshold, float(budget), model, b)


def mdm_integrate(
    f: ProductFunction,
    plan: MDMPlan,
    space: UnivariateSpace,
    setting: str = "det",
    seed: int | None = None,
    replicate: int = 0,
) -> IntegrationResult:
    """``sum_u Q_u(f_u)`` with ``|u|``-dimensional CBC rules (scrambled for ``ran``)."""
    _check_product(f)
    if setting not in ("det", "ran"):
        raise DomainError("setting must be det or ran")
    xi = _XiCache(f, space)
    estimate = 0.0
    for index, (u, n) in enumerate(zip(plan.sets, plan.sizes)):
        coords = sorted(u)
        if not coords:
            estimate += xi.complement(u)
            continue
        m = round(math.log(n, plan.b))
        unit = explicit([1.0] * len(coords), 2.0)
        nodes = _rule_nodes(space, unit, 0.0, len(coords), m, plan.b, setting, seed, (replicate, index))
        estimate += float(np.mean(_component_values(f, xi, coords, nodes)))
    return IntegrationResult(estimate, plan.cost, {"sets": len(plan.sets), "max_order": plan.max_order})


# ---------------------------------------------------------------------------
# multilevel method
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MultilevelPlan:
    """Levels ``l = 0 .. L`` with dimensions ``2**l`` and sizes ``n_l``."""

    dims: tuple[int, ...]
    sizes: tuple[int, ...]
    predicted_error: float
    model: CostModel
    b: int = 2

    @property
    def cost(self) -> float:
        total = 0.0
        for level, (s, n) in enumerate(zip(self.dims, self.sizes)):
            per_node = float(self.model.price(s))
            if level > 0:
                per_node += float(self.model.price(self.dims[level - 1]))
            total += n * per_node
        return total


def _level_bounds(weights: WeightSequence, dsq: float, dims: Sequence[int]) -> np.ndarray:
    logs = np.log1p(weights.first(dims[-1]) * dsq)
    cum = np.r_[0.0, np.cumsum(logs)]
    out = []
    for level, s in enumerate(dims):
        prev = dims[level - 1] if level else 0
        if level == 0:
            out.append(math.sqrt(weights.weight(1) * dsq))
        else:
            out.append(math.sqrt(math.exp(cum[prev]) * math.expm1(cum[s] - cum[prev])))
    return np.array(out)


def multilevel_plan(
    weights: WeightSequence,
    space: UnivariateSpace,
    budget: float,
    model: CostModel | None = None,
    rate_hint: float = 1.0,
    b: int = 2,
    max_level: int = 8,
    max_m: int = 13,
) -> MultilevelPlan:
    """Choose ``L`` and ``n_l`` proportional to ``(B_l / $_l)**(1/(rate_hint+1))``.

    ``B_l`` bounds the norm of the level difference and ``$_l`` is the
    cost of one node on level ``l`` (two evaluations for ``l > 0``).  The
    number of levels minimizes the predicted error including the bound
    ``(d**2 sum_{j > 2**L} gamma_j)**(1/2)`` on the truncation error.
    """
    model = CostModel("nest") if model is None else model
    if model.variant != "nest":
        raise DomainError("the multilevel method is planned under the nest cost model")
    d = truncation_constant(space) if space.homogeneous else 1.0
    dsq = d * d
    best = None
    for top in range(max_level + 1):
        dims = tuple(2**level for level in range(top + 1))
        bounds = _level_bounds(weights, dsq, dims)
        per_node = np.array(
            [float(model.price(s)) + (float(model.price(dims[k - 1])) if k else 0.0) for k, s in enumerate(dims)]
        )
        if per_node.sum() > budget:
            break
        share = (bounds / per_node) ** (1.0 / (rate_hint + 1.0))
        target = share * budget / float(share @ per_node)
        sizes = tuple(
            b ** int(min(max_m, math.floor(math.log(t, b) + 1e-12))) if t >= 1 else 1 for t in target
        )
        predicted = float(np.sum(bounds * np.asarray(sizes, dtype=float) ** (-rate_hint)))
        predicted += math.sqrt(dsq * weights.tail_sum(dims[-1]))
        if best is None or predicted < best.predicted_error:
            best = MultilevelPlan(dims, sizes, predicted, model, b)
    if best is None:
        raise PlanError("budget too small for a single level")
    return best


def _truncated(f: ProductFunction, points: np.ndarray, s: int, anchor: float) -> np.ndarray:
    """``f`` with coordinates beyond ``s`` set to ``anchor``."""
    return f(points[:, :s], tail=anchor)


def multilevel_integrate(
    f: ProductFunction,
    plan: MultilevelPlan,
    space: UnivariateSpace,
    weights: WeightSequence,
    setting: str = "det",
    seed: int | None = None,
    replicate: int = 0,
) -> IntegrationResult:
    """Telescoping sum ``sum_l Q_l(f^(s_l) - f^(s_{l-1}))`` over dimension truncations."""
    _check_product(f)
    anchor = plan.model.anchor
    estimate = 0.0
    contributions = []
    for level, (s, n) in enumerate(zip(plan.dims, plan.sizes)):
        m = round(math.log(n, plan.b))
        nodes = _rule_nodes(space, weights, 1.0, s, m, plan.b, setting, seed, (replicate, level))
        values = _truncated(f, nodes, s, anchor)
        if level:
            values = values - _truncated(f, nodes, plan.dims[level - 1], anchor)
        part = float(np.mean(values))
        contributions.append(part)
        estimate += part
    return IntegrationResult(estimate, plan.cost, {"levels": tuple(contributions)})


# ---------------------------------------------------------------------------
# fixed subspace sampling
# ---------------------------------------------------------------------------


def fixed_subspace_integrate(
    f: ProductFunction,
    s: int,
    n: int,
    space: UnivariateSpace,
    weights: WeightSequence,
    setting: str = "det",
    seed: int | None = None,
    model: CostModel | None = None,
    b: int = 2,
    replicate: int = 0,
) -> IntegrationResult:
    """One ``s``-dimensional rule of size ``n = b**m``; coordinates beyond ``s`` at the default value."""
    _check_product(f)
    model = CostModel("fix") if model is None else model
    if s < 0:
        raise DomainError("s must be nonnegative")
    if s == 0:
        value = float(f(np.zeros((1, 0)), tail=model.anchor)[0])
        return IntegrationResult(value, float(model.price(0)))
    m = round(math.log(n, b))
    if n < 1 or b**m != n:
        raise DomainError("n must be a power of the base")
    nodes = _rule_nodes(space, weights, 1.0, s, m, b, setting, seed, (replicate, s))
    estimate = float(np.mean(_truncated(f, nodes, s, model.anchor)))
    return IntegrationResult(estimate, float(n * model.price(s)))


# ---------------------------------------------------------------------------
# empirical rates
# ---------------------------------------------------------------------------


def fit_rate(pairs: Sequence[tuple[float, float]]) -> tuple[float, float]:
    """Least-squares slope of ``-log(error)`` against ``log(cost)`` and its standard error."""
    data = np.asarray(pairs, dtype=float)
    if data.ndim != 2 or data.shape[0] < 4 or data.shape[1] != 2:
        raise DomainError("need at least four (cost, error) pairs")
    if np.any(data <= 0) or not np.all(np.isfinite(data)):
        raise DomainError("costs and errors must be positive and finite")
    x = np.log(data[:, 0])
    if np.ptp(x) < 1e-12:
        raise DomainError("costs must not all be equal")
    fit = stats.linregress(x, -np.log(data[:, 1]))
    return float(fit.slope), float(fit.stderr)
