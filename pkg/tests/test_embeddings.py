import math

import numpy as np
import pytest
import scipy.linalg as sla
from hypothesis import given, settings
from hypothesis import strategies as st

from rkhs_qmc.embeddings import (
    EmbeddingProblem,
    embedding_norm_lower,
    defective_norm_counterexample,
    uniform_bound_sweep,
    univariate_embedding_norm,
)
from rkhs_qmc.errors import DomainError, UnsupportedSpaceError
from rkhs_qmc.univariate_spaces import NormFlavor, UnivariateSpace, equivalence_constant
from rkhs_qmc.weights import explicit, polynomial


def sp(flavor, r=1):
    return UnivariateSpace(NormFlavor.parse(flavor), r)


def _legendre_oracle(gamma: float, eta: float, degree: int = 24) -> float:
    """Embedding norm ANOVA(eta) -> Anchored(0)(gamma), r=1, on polynomials of a given degree."""
    x, w = np.polynomial.legendre.leggauss(degree + 2)
    x, w = 0.5 * (x + 1), 0.5 * w
    legendre = np.polynomial.legendre.Legendre
    vals = np.array([legendre.basis(k, domain=[0, 1])(x) for k in range(degree + 1)])
    ders = np.array([legendre.basis(k, domain=[0, 1]).deriv()(x) for k in range(degree + 1)])
    at0 = np.array([legendre.basis(k, domain=[0, 1])(0.0) for k in range(degree + 1)])
    means = vals @ w
    d2 = (ders * w) @ ders.T
    target = np.outer(at0, at0) + d2 / gamma
    source = np.outer(means, means) + d2 / eta
    return math.sqrt(sla.eigh(target, source, eigvals_only=True)[-1])


def test_identical_sides_give_one():
    w = polynomial(2)
    prob = EmbeddingProblem(sp("anova"), w, sp("anova"), w, 3)
    assert embedding_norm_lower(prob) == pytest.approx(1.0, abs=1e-9)


def test_anchored_from_anova_regression_value():
    values = [univariate_embedding_norm(sp("anchored:0"), 1.0, sp("anova"), 1.0, res) for res in (16, 32, 64, 128)]
    assert max(values) - min(values) < 1e-4
    assert values[-1] == pytest.approx(1.3295081343, rel=1e-9)
    assert values[-1] == pytest.approx(_legendre_oracle(1.0, 1.0), rel=1e-8)


@pytest.mark.parametrize("gamma,eta", [(0.3, 0.3), (2.0, 0.5), (0.1, 1.0)])
def test_univariate_norm_matches_polynomial_oracle(gamma, eta):
    got = univariate_embedding_norm(sp("anchored:0"), gamma, sp("anova"), eta)
    assert got == pytest.approx(_legendre_oracle(gamma, eta), rel=1e-8)


def test_kronecker_matches_dense_tensor_problem():
    prob = EmbeddingProblem(sp("anchored:0.5", 1), explicit([0.7, 0.4], 2), sp("standard", 1), explicit([0.3, 0.2], 2), 2, 24)
    assert embedding_norm_lower(prob) == pytest.approx(embedding_norm_lower(prob, dense=True), rel=1e-9)


def test_norm_bounded_by_budget_with_scaled_weights():
    w = polynomial(2)
    _, c0 = equivalence_constant(sp("anova"), sp("standard"))
    for s in (1, 2, 3, 4):
        prob = EmbeddingProblem(sp("anova"), w, sp("standard"), w.scaled(c0), s)
        assert embedding_norm_lower(prob) <= w.embedding_budget(s)


def test_sweep_same_flavor_is_identity():
    rows = uniform_bound_sweep(NormFlavor.anova(), NormFlavor.anova(), 1, polynomial(2), 1.0, 3)
    for row in rows:
        assert row.norms() == pytest.approx((1.0, 1.0, 1.0, 1.0))


def test_sweep_anova_standard_example():
    w = polynomial(2)
    _, c0 = equivalence_constant(sp("anova"), sp("standard"))
    rows = uniform_bound_sweep(NormFlavor.anova(), NormFlavor.standard(), 1, w, c0, 4)
    # oracle for the budget: sqrt(prod (1 + 1/j^2)) = sqrt(sinh(pi) / pi)
    assert rows[0].budget == pytest.approx(math.sqrt(math.sinh(math.pi) / math.pi), rel=1e-6)
    for prev, row in zip(rows, rows[1:]):
        assert all(b >= a - 1e-12 for a, b in zip(prev.norms(), row.norms()))
    assert all(v <= rows[-1].budget for v in rows[-1].norms())


def test_korobov_embedding_is_diagonal():
    assert univariate_embedding_norm(sp("korobov"), 1.0, sp("korobov"), 4.0) == pytest.approx(2.0)
    assert univariate_embedding_norm(sp("korobov"), 4.0, sp("korobov"), 1.0) == pytest.approx(1.0)
    with pytest.raises(UnsupportedSpaceError):
        EmbeddingProblem(sp("korobov"), polynomial(2), sp("anova"), polynomial(2), 1)


def test_problem_validation():
    with pytest.raises(DomainError):
        EmbeddingProblem(sp("anova", 1), polynomial(2), sp("anova", 2), polynomial(2), 1)
    with pytest.raises(DomainError):
        uniform_bound_sweep(NormFlavor.anova(), NormFlavor.standard(), 1, polynomial(2), 1.5, 2)
    with pytest.raises(DomainError):
        embedding_norm_lower(EmbeddingProblem(sp("anova"), polynomial(2), sp("standard"), polynomial(2), 3), dense=True)


def test_counterexample_examples():
    w = polynomial(2)
    lhs, rhs = defective_norm_counterexample(2, w, 3)
    assert lhs == 1.0
    assert rhs == pytest.approx(1456.0, rel=1e-12)
    values = [defective_norm_counterexample(3, w, s)[1] for s in range(1, 8)]
    assert all(b > a for a, b in zip(values, values[1:]))
    with pytest.raises(DomainError):
        defective_norm_counterexample(1, w, 2)


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(0.05, 5.0))
def test_univariate_norm_at_least_one(gamma, eta):
    # constants have norm 1 on both sides
    assert univariate_embedding_norm(sp("anova"), gamma, sp("anchored:0"), eta, 32) >= 1 - 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 5.0), st.floats(1.01, 4.0))
def test_larger_target_weight_never_increases_norm(gamma, factor):
    a = univariate_embedding_norm(sp("anchored:0"), gamma, sp("standard"), 1.0, 32)
    b = univariate_embedding_norm(sp("anchored:0"), gamma * factor, sp("standard"), 1.0, 32)
    assert b <= a * (1 + 1e-9)
