import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhs_qmc.errors import DomainError, HypothesisError, PlanError
from rkhs_qmc.idim_integration import (
    CostModel,
    ProvenancedRule,
    cost,
    fit_rate,
    fixed_subspace_integrate,
    mdm_integrate,
    mdm_plan,
    multilevel_integrate,
    multilevel_plan,
    product_test_integrand,
    theoretical_lambda,
    truncation_constant,
)
from rkhs_qmc.tensor_spaces import ProductFunction
from rkhs_qmc.univariate_spaces import NormFlavor, SampledFunction, UnivariateSpace
from rkhs_qmc.weights import polynomial

ANCHORED = UnivariateSpace(NormFlavor.anchored(0.0), 1)


def single_node(active, d=12):
    row = np.zeros(d)
    for j in active:
        row[j - 1] = 0.5
    return ProvenancedRule.from_nodes([row], [1.0])


# -- cost models ---------------------------------------------------------------


def test_cost_examples():
    lin = CostModel("unr")
    assert cost(single_node([]), lin) == 1.0
    q = single_node(range(1, 6))
    assert [cost(q, lin.with_variant(v)) for v in ("unr", "nest", "fix")] == [6.0, 6.0, 6.0]
    q = single_node([10])
    assert cost(q, lin) == 2.0
    assert cost(q, lin.with_variant("nest")) == 11.0


def test_cost_model_parsing():
    assert CostModel.parse("nest", "pow:1.5").price(3) == pytest.approx(8.0)
    assert CostModel.parse("unr", "exp:0.5").price(2) == pytest.approx(math.e)
    for bad in ("lin:2", "pow", "cubic"):
        with pytest.raises(DomainError):
            CostModel.parse("unr", bad)
    with pytest.raises(DomainError):
        cost(single_node([1]), CostModel("unr", anchor=0.5))


def test_rule_must_respect_active_sets():
    with pytest.raises(DomainError):
        ProvenancedRule([[0.3, 0.2]], [1.0], [frozenset({1})])


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1), st.sampled_from(["lin", "pow:2", "pow:0.5", "exp:0.3"]))
def test_cost_ordering(seed, growth):
    rng = np.random.default_rng(seed)
    n, d = rng.integers(1, 12), rng.integers(1, 30)
    nodes = np.where(rng.random((n, d)) < 0.3, rng.random((n, d)), 0.0)
    q = ProvenancedRule.from_nodes(nodes, np.full(n, 1 / n))
    model = CostModel.parse("unr", growth)
    unr, nest, fix = (cost(q, model.with_variant(v)) for v in ("unr", "nest", "fix"))
    assert unr <= nest <= fix


# -- exponent brackets ---------------------------------------------------------


@pytest.mark.parametrize(
    "args,expected",
    [
        (("det", "std", 1, 3.0), (1.0, 1.0)),
        (("ran", "unr", 1, 4.0), (1.5, 1.5)),
        (("ran", "fix", 1, 3.0), (0.6, 0.6)),
        (("det", "nest", 2, 6.0, 1.0), (2.0, 2.0)),
    ],
)
def test_lambda_examples(args, expected):
    got = theoretical_lambda(*args)
    assert (got.lower, got.upper) == pytest.approx(expected)
    assert got.exact and not got.open_gap


def test_lambda_open_range_is_flagged():
    got = theoretical_lambda("ran", "nest", 2, 9.0, 1.0)
    assert got.open_gap and got.lower < got.upper
    assert not theoretical_lambda("ran", "nest", 2, 5.0, 1.0).open_gap


def test_lambda_hypotheses():
    with pytest.raises(HypothesisError):
        theoretical_lambda("det", "fix", 1, 3.0)
    with pytest.raises(HypothesisError):
        theoretical_lambda("det", "nest", 2, 3.0, 0.5)
    with pytest.raises(HypothesisError):
        theoretical_lambda("ran", "unr", 1, 3.0, space="korobov")
    with pytest.raises(HypothesisError):
        theoretical_lambda("det", "unr", 1, 1.0)
    with pytest.raises(DomainError):
        theoretical_lambda("mc", "unr", 1, 3.0)


admissible = st.tuples(st.integers(1, 3), st.floats(1.05, 12.0), st.one_of(st.just(1.0), st.floats(0.5, 3.0)))


def _lam(setting, model, r, decay, sigma):
    try:
        return theoretical_lambda(setting, model, r, decay, sigma)
    except HypothesisError:
        return None


@settings(max_examples=200)
@given(admissible)
def test_lambda_ordering(params):
    r, decay, sigma = params
    for setting in ("det", "ran"):
        chain = [_lam(setting, m, r, decay, sigma) for m in ("fix", "nest", "unr")]
        known = [b for b in chain if b is not None]
        for lo, hi in zip(known, known[1:]):
            assert lo.lower <= hi.upper + 1e-12
    for model in ("std", "nest", "unr"):
        det, ran = _lam("det", model, r, decay, sigma), _lam("ran", model, r, decay, sigma)
        if det and ran:
            assert det.lower <= ran.upper + 1e-12


@given(st.floats(1.05, 12.0), st.floats(1e-3, 1e3))
def test_lambda_depends_on_weights_only_through_decay(p, c):
    d1, d2 = polynomial(p).decay(), polynomial(p, scale=c).decay()
    assert theoretical_lambda("ran", "unr", 1, d1) == theoretical_lambda("ran", "unr", 1, d2)


# -- decomposition method ------------------------------------------------------


def test_minimal_budget_plan():
    plan = mdm_plan(polynomial(3), ANCHORED, 1.0)
    assert plan.sets == (frozenset(),) and plan.sizes == (1,)
    with pytest.raises(PlanError):
        mdm_plan(polynomial(3), ANCHORED, 0.5)
    with pytest.raises(DomainError):
        mdm_plan(polynomial(3), ANCHORED, 64.0, CostModel("nest"))


def test_plans_grow_and_stay_downward_closed():
    w = polynomial(3)
    dsq = truncation_constant(ANCHORED) ** 2
    previous = set()
    for k in range(6, 15, 2):
        plan = mdm_plan(w, ANCHORED, 2.0**k)
        sets = set(plan.sets)
        assert previous <= sets
        assert plan.cost <= 2.0**k
        # oracle: explicit enumeration of gamma_u d^(2|u|) over u in 1:20, |u| <= 4
        score = lambda u: w.set_weight(u) * dsq ** len(u)  # noqa: E731
        smallest = min(score(u) for u in sets)
        for size in range(5):
            for u in itertools.combinations(range(1, 21), size):
                if score(u) > smallest * (1 + 1e-12):
                    assert frozenset(u) in sets
        previous = sets
    assert max(len(u) for u in previous) >= 2


def test_constant_integrand_is_exact():
    f = ProductFunction([], extension=lambda j: SampledFunction.constant())
    plan = mdm_plan(polynomial(3), ANCHORED, 256.0)
    for setting in ("det", "ran"):
        assert mdm_integrate(f, plan, ANCHORED, setting, seed=1).estimate == pytest.approx(1.0)


def test_non_product_integrand_is_rejected():
    plan = mdm_plan(polynomial(3), ANCHORED, 16.0)
    with pytest.raises(DomainError):
        mdm_integrate(lambda x: x.sum(axis=1), plan, ANCHORED)


def test_randomized_beats_deterministic_for_fast_decay():
    w = polynomial(4)
    f = product_test_integrand(w)
    plan = mdm_plan(w, ANCHORED, 2.0**12)
    det = abs(mdm_integrate(f, plan, ANCHORED).estimate - 1)
    est = np.array([mdm_integrate(f, plan, ANCHORED, "ran", seed=3, replicate=q).estimate for q in range(12)])
    rmse = math.sqrt(np.mean((est - 1) ** 2))
    sigma = est.std(ddof=1)
    assert rmse <= det
    # unbiased: mean within 3 standard errors of the exact value
    assert abs(est.mean() - 1) <= 3 * sigma / math.sqrt(est.size)


# -- multilevel ----------------------------------------------------------------


def test_first_coordinate_only_integrand_has_no_level_differences():
    w = polynomial(4)
    g = SampledFunction.from_polynomial([0.5, 1.0, -1.5], degree=3)
    f = ProductFunction([g], extension=lambda j: SampledFunction.constant())
    plan = multilevel_plan(w, ANCHORED, 2.0**10)
    res = multilevel_integrate(f, plan, ANCHORED, w)
    assert len(plan.dims) > 1
    # zero up to rounding in the spline evaluation of the constant factors
    assert all(abs(c) <= 1e-14 for c in res.details["levels"][1:])
    assert res.estimate == pytest.approx(0.5, abs=1e-2)  # int (1/2 + x - 3x^2/2) = 1/2


def test_multilevel_rate():
    w = polynomial(4)
    f = product_test_integrand(w)
    pairs = []
    for k in range(6, 17, 2):
        plan = multilevel_plan(w, ANCHORED, 2.0**k)
        res = multilevel_integrate(f, plan, ANCHORED, w)
        assert res.cost <= 2.0**k
        pairs.append((res.cost, abs(res.estimate - 1)))
    slope, _ = fit_rate(pairs)
    assert slope >= 0.7


def test_multilevel_and_mdm_agree():
    w = polynomial(3)
    f = product_test_integrand(w)
    ml = [multilevel_integrate(f, multilevel_plan(w, ANCHORED, 2.0**10), ANCHORED, w, "ran", 5, q).estimate for q in range(8)]
    plan = mdm_plan(w, ANCHORED, 2.0**10)
    md = [mdm_integrate(f, plan, ANCHORED, "ran", 5, q).estimate for q in range(8)]
    se = math.hypot(np.std(ml, ddof=1), np.std(md, ddof=1)) / math.sqrt(8)
    assert abs(np.mean(ml) - np.mean(md)) <= 3 * se + 1e-12


def test_multilevel_plan_errors():
    with pytest.raises(PlanError):
        multilevel_plan(polynomial(3), ANCHORED, 0.5)
    with pytest.raises(DomainError):
        multilevel_plan(polynomial(3), ANCHORED, 64.0, CostModel("unr"))


# -- fixed subspace sampling ---------------------------------------------------


def test_zero_dimensional_rule_evaluates_at_default():
    f = product_test_integrand(polynomial(2), "offset")
    res = fixed_subspace_integrate(f, 0, 1, ANCHORED, polynomial(3))
    # every factor is 1 + gamma_j g(0) with g(0) = -1/2
    expected = math.prod(1 - 0.5 * j**-2.0 for j in range(1, 200_000))
    assert res.estimate == pytest.approx(expected, rel=1e-5)
    assert res.cost == 1.0
    with pytest.raises(DomainError):
        fixed_subspace_integrate(f, 3, 12, ANCHORED, polynomial(3))


def test_truncation_bias_shrinks_with_dimension():
    f = product_test_integrand(polynomial(2), "offset")
    biases = []
    for s in (1, 2, 4, 8, 16):
        plan_value = math.prod(1 - 0.5 * j**-2.0 for j in range(s + 1, 200_000))
        biases.append(abs(1 - plan_value))
        res = fixed_subspace_integrate(f, s, 2**12, ANCHORED, polynomial(3), "ran", seed=2)
        assert abs(res.estimate - plan_value) < 1e-2
    assert all(b <= a for a, b in zip(biases, biases[1:]))


def test_fixed_subspace_tradeoff_rate():
    # best (s, n) split per budget; amplitude decay 2.05 puts the weights at decay about 3
    w = polynomial(3)
    f = product_test_integrand(polynomial(2.05), "offset")
    dims = sorted({int(round(1.5**i)) for i in range(20)}, reverse=True)
    best = []
    for k in range(6, 17, 2):
        budget, rows = 2.0**k, []
        for s in dims:
            m = min(13, int(math.floor(math.log2(budget / (1 + s)))))
            if m < 0:
                continue
            est = [fixed_subspace_integrate(f, s, 2**m, ANCHORED, w, "ran", seed=7, replicate=q).estimate for q in range(12)]
            rows.append((math.sqrt(np.mean((np.array(est) - 1) ** 2)), 2**m * (1 + s)))
        err, c = min(rows)
        best.append((c, err))
    slope, _ = fit_rate(best)
    assert 0.5 <= slope <= 0.7


# -- rate fitting --------------------------------------------------------------


def test_fit_rate_examples():
    costs = 2.0 ** np.arange(4, 12)
    slope, err = fit_rate(list(zip(costs, 1 / costs)))
    assert slope == pytest.approx(1.0) and err == pytest.approx(0.0, abs=1e-12)
    assert fit_rate(list(zip(costs, np.full(costs.size, 0.3))))[0] == pytest.approx(0.0, abs=1e-12)
    rng = np.random.default_rng(8)
    noisy = costs**-1.5 * (1 + 0.05 * rng.standard_normal(costs.size))
    assert 1.4 <= fit_rate(list(zip(costs, noisy)))[0] <= 1.6


@pytest.mark.parametrize(
    "pairs", [[(1, 1)] * 3, [(2, 1), (2, 0.5), (2, 0.3), (2, 0.1)], [(1, 1), (2, 0), (4, 1), (8, 1)]]
)
def test_fit_rate_rejects_degenerate_input(pairs):
    with pytest.raises(DomainError):
        fit_rate(pairs)
