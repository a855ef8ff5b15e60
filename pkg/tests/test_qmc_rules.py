import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhs_qmc.errors import DomainError
from rkhs_qmc.qmc_rules import (
    PolynomialLattice,
    QuadratureRule,
    RandomizedRuleFamily,
    cbc_construct,
    default_modulus,
    format_generating_vector,
    interlace,
    is_irreducible,
    owen_scramble,
    parse_generating_vector,
    plr_points,
    randomized_error,
    scrambled_wce,
    shift_averaged_wce,
    wce,
    wce_squared,
)
from rkhs_qmc.tensor_spaces import ProductFunction, ProductKernel
from rkhs_qmc.univariate_spaces import NormFlavor, SampledFunction, UnivariateSpace, equivalence_constant
from rkhs_qmc.weights import explicit, polynomial

ANCHORED = UnivariateSpace(NormFlavor.anchored(0.0), 1)
ANOVA = UnivariateSpace(NormFlavor.anova(), 1)


def _digits(x: np.ndarray, depth: int = 30) -> np.ndarray:
    return (np.floor(np.asarray(x)[..., None] * 2.0 ** np.arange(1, depth + 1)) % 2).astype(int)


# -- point sets ----------------------------------------------------------------


def test_smallest_lattice():
    lat = PolynomialLattice(2, 1, 0b10, (1,))
    assert sorted(plr_points(lat)[:, 0]) == [0.0, 0.5]


@pytest.mark.parametrize("b,m", [(2, 5), (3, 3)])
def test_point_count_and_origin(b, m):
    lat = PolynomialLattice(b, m, default_modulus(b, m), (1, 2, b**m - 1))
    pts = plr_points(lat)
    assert pts.shape == (b**m, 3)
    assert np.all(pts[0] == 0)
    assert np.all((pts >= 0) & (pts < 1))


def test_one_dimensional_rule_is_equidistant():
    lat = PolynomialLattice(2, 4, default_modulus(2, 4), (1,))
    assert sorted(plr_points(lat)[:, 0]) == pytest.approx(np.arange(16) / 16)


def test_default_moduli_are_irreducible():
    for m in range(1, 21):
        assert is_irreducible(default_modulus(2, m), 2)
    for m in range(1, 8):
        assert is_irreducible(default_modulus(3, m), 3)
    # z^2 + 1 = (z + 1)^2 over GF(2)
    assert not is_irreducible(0b101, 2)


def test_points_form_a_digital_group():
    lat = PolynomialLattice(2, 6, default_modulus(2, 6), (1, 27, 45))
    pts = plr_points(lat)
    digits = _digits(pts)
    keys = {tuple(row.ravel()) for row in digits}
    rng = np.random.default_rng(3)
    for _ in range(200):
        i, k = rng.integers(0, lat.n, 2)
        assert tuple(((digits[i] + digits[k]) % 2).ravel()) in keys


def test_interlace_examples():
    assert interlace([[0.5, 0.25]], 2)[0, 0] == pytest.approx(0.5625)
    pts = np.random.default_rng(0).random((5, 3))
    assert np.array_equal(interlace(pts, 1), pts)
    with pytest.raises(DomainError):
        interlace(pts, 2)


@given(st.lists(st.floats(0.0, 1.0, exclude_max=True), min_size=4, max_size=4))
def test_interlace_stays_in_unit_interval(xs):
    out = interlace([xs], 2)
    assert np.all((out >= 0) & (out < 1))


def test_interlace_matches_exact_digit_expansion():
    x, y = 0.8125, 0.375  # 0.1101, 0.011
    expected = Fraction(0)
    for i, (dx, dy) in enumerate(zip([1, 1, 0, 1], [0, 1, 1, 0])):
        expected += Fraction(dx, 2 ** (2 * i + 1)) + Fraction(dy, 2 ** (2 * i + 2))
    assert interlace([[x, y]], 2)[0, 0] == float(expected)


# -- scrambling ----------------------------------------------------------------


def test_owen_is_deterministic():
    pts = np.random.default_rng(1).random((8, 2))
    a = owen_scramble(pts, 2, 99, 4)
    assert np.array_equal(a, owen_scramble(pts, 2, 99, 4))
    assert not np.array_equal(a, owen_scramble(pts, 2, 99, 5))


def test_owen_nesting_preserves_shared_prefixes():
    # points sharing their first k digits keep sharing k digits after scrambling
    pts = np.array([[0.625], [0.6875], [0.125]])  # 0.101, 0.1011, 0.001
    out = owen_scramble(pts, 2, 7, 0)
    d = _digits(out[:, 0])
    assert np.array_equal(d[0, :3], d[1, :3])
    assert d[0, 0] != d[2, 0]


def test_owen_scrambled_point_is_uniform():
    pts = np.full((1, 1), 0.3)
    vals = np.array([owen_scramble(pts, 2, 5, k)[0, 0] for k in range(10_000)])
    sigma = math.sqrt(1 / 12 / vals.size)
    assert abs(vals.mean() - 0.5) <= 3 * sigma


def test_owen_base_three_stays_in_range():
    pts = np.random.default_rng(2).random((20, 2))
    out = owen_scramble(pts, 3, 1, 0)
    assert np.all((out >= 0) & (out < 1))


# -- worst-case errors ---------------------------------------------------------


@pytest.mark.parametrize("gamma", [0.25, 1.0, 3.0])
def test_single_midpoint_node(gamma):
    k = ProductKernel(ANCHORED, explicit([gamma], 2.0), 1)
    assert wce(QuadratureRule([[0.5]], [1.0]), k) == pytest.approx(math.sqrt(gamma / 12))


def test_vanishing_weight_integrates_exactly():
    k = ProductKernel(ANOVA, polynomial(2, scale=1e-14), 2)
    rule = QuadratureRule(np.random.default_rng(0).random((6, 2)), np.full(6, 1 / 6))
    assert wce(rule, k) == pytest.approx(0.0, abs=1e-6)


def _naive_wce2(rule: QuadratureRule, kernel: ProductKernel) -> float:
    terms = [kernel.double_integral()]
    for w, t in zip(rule.weights, rule.nodes):
        terms.append(-2 * w * float(kernel.mean(t[None, :])[0]))
    for wi, ti in zip(rule.weights, rule.nodes):
        for wk, tk in zip(rule.weights, rule.nodes):
            terms.append(wi * wk * kernel.eval(ti, tk))
    return math.fsum(terms)


def test_wce_matches_naive_double_sum():
    rng = np.random.default_rng(11)
    rule = QuadratureRule(rng.random((4, 2)), rng.random(4))
    for space in (ANCHORED, ANOVA):
        k = ProductKernel(space, polynomial(2), 2)
        assert wce_squared(rule, k) == pytest.approx(_naive_wce2(rule, k), rel=1e-10)


def test_merging_duplicate_nodes_keeps_wce():
    rng = np.random.default_rng(4)
    nodes = rng.random((5, 2))
    k = ProductKernel(ANOVA, polynomial(2), 2)
    split = QuadratureRule(np.vstack([nodes, nodes[:1]]), np.full(6, 1 / 6))
    merged = QuadratureRule(nodes, np.array([2, 1, 1, 1, 1]) / 6)
    assert wce(merged, k) <= wce(split, k) * (1 + 1e-12)
    assert wce(merged, k) >= 0


def test_shift_average_matches_monte_carlo():
    lat = PolynomialLattice(2, 4, default_modulus(2, 4), (1, 7))
    k = ProductKernel(ANCHORED, polynomial(2), 2)
    direct = shift_averaged_wce(lat.rule(), k) ** 2
    fam = RandomizedRuleFamily(lat, "shift", 17)
    samples = np.array([wce(fam.realization(i), k) ** 2 for i in range(64)])
    sigma = samples.std(ddof=1) / math.sqrt(samples.size)
    assert abs(samples.mean() - direct) <= 3 * sigma


def test_scrambled_criterion_matches_monte_carlo():
    lat = PolynomialLattice(2, 3, default_modulus(2, 3), (1, 3))
    k = ProductKernel(ANOVA, polynomial(2), 2)
    direct = scrambled_wce(lat, k) ** 2
    fam = RandomizedRuleFamily(lat, "owen", 23)
    samples = np.array([wce(fam.realization(i), k) ** 2 for i in range(400)])
    sigma = samples.std(ddof=1) / math.sqrt(samples.size)
    assert abs(samples.mean() - direct) <= 3 * sigma


# -- construction --------------------------------------------------------------


def test_cbc_single_candidate():
    lat = cbc_construct(2, 1, 1, ProductKernel(ANCHORED, polynomial(2), 1))
    assert lat.generating_vector == (1,)
    assert sorted(plr_points(lat)[:, 0]) == [0.0, 0.5]


def test_cbc_choice_beats_every_candidate():
    k = ProductKernel(ANCHORED, polynomial(2), 2)
    lat = cbc_construct(2, 5, 2, k)
    best = wce(lat.rule(), k)
    for q in range(1, 32):
        trial = PolynomialLattice(2, 5, lat.modulus, (lat.generating_vector[0], q))
        assert best <= wce(trial.rule(), k) * (1 + 1e-9)


def test_cbc_fast_and_direct_paths_agree():
    k = ProductKernel(ANCHORED, polynomial(2), 3)
    fast = cbc_construct(2, 5, 3, k)
    direct = cbc_construct(2, 5, 3, k, candidates=range(1, 32))
    assert wce(fast.rule(), k) == pytest.approx(wce(direct.rule(), k), rel=1e-9)


def test_cbc_rejects_unknown_criterion():
    with pytest.raises(DomainError):
        cbc_construct(2, 3, 1, ProductKernel(ANCHORED, polynomial(2), 1), criterion="median")


@pytest.mark.parametrize("s", [1, 2, 3, 4])
def test_cbc_rules_transfer_between_flavors(s):
    w = polynomial(3)
    _, c0 = equivalence_constant(ANCHORED, ANOVA)
    k_i = ProductKernel(ANCHORED, w, s)
    k_ii = ProductKernel(ANOVA, w.scaled(c0), s)
    for m in (4, 6, 8):
        rule = cbc_construct(2, m, s, k_i).rule()
        assert wce(rule, k_ii) <= w.embedding_budget(s) * wce(rule, k_i)


# -- randomized error ----------------------------------------------------------


def test_randomized_error_of_constant_is_zero():
    lat = PolynomialLattice(2, 4, default_modulus(2, 4), (1, 5))
    k = ProductKernel(ANCHORED, polynomial(2), 2)
    f = ProductFunction([SampledFunction.constant()] * 2)
    res = randomized_error(RandomizedRuleFamily(lat, "owen", 3), f, k, 8)
    assert res.rmse == pytest.approx(0.0, abs=1e-14) and res.bias == pytest.approx(0.0, abs=1e-14)
    with pytest.raises(DomainError):
        randomized_error(RandomizedRuleFamily(lat, "owen", 3), f, k, 1)


def test_scrambled_rule_is_unbiased():
    lat = PolynomialLattice(2, 4, default_modulus(2, 4), (1, 5), 1)
    k = ProductKernel(ANCHORED, polynomial(2), 2)
    f = ProductFunction([SampledFunction.from_polynomial([0.0, 1.0, -2.0, 3.0], degree=3)] * 2)
    res = randomized_error(RandomizedRuleFamily(lat, "owen", 8), f, k, 200)
    assert abs(res.bias) <= 3 * res.std / math.sqrt(res.replicates)


def test_realizations_are_pure():
    lat = PolynomialLattice(2, 4, default_modulus(2, 4), (1, 5, 3, 9), 2)
    fam = RandomizedRuleFamily(lat, "owen", 2**40 + 3)
    a, b = fam.realization(6), fam.realization(6)
    assert np.array_equal(a.nodes, b.nodes) and a.provenance == "interlaced-scrambled-plr"
    with pytest.raises(DomainError):
        RandomizedRuleFamily(lat, "jitter", 1)


# -- text format ---------------------------------------------------------------


@pytest.mark.parametrize("b,m,r", [(2, 6, 1), (3, 3, 2)])
def test_generating_vector_round_trip(b, m, r):
    rng = np.random.default_rng(m)
    lat = PolynomialLattice(b, m, default_modulus(b, m), tuple(int(q) for q in rng.integers(1, b**m, 2 * r)), r)
    assert parse_generating_vector(format_generating_vector(lat)) == lat


def test_lattice_validation():
    with pytest.raises(DomainError):
        PolynomialLattice(2, 3, 0b10, (1,))
    with pytest.raises(DomainError):
        PolynomialLattice(2, 2, 0b111, (4,))
    with pytest.raises(DomainError):
        PolynomialLattice(4, 2, 0b111, (1,))
    with pytest.raises(DomainError):
        QuadratureRule([[1.0]], [1.0])


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(1, 3))
def test_wce_nonnegative(seed, n, s):
    rng = np.random.default_rng(seed)
    rule = QuadratureRule(rng.random((n, s)), rng.dirichlet(np.ones(n)))
    assert wce(rule, ProductKernel(ANOVA, polynomial(2), s)) >= 0
