"""Integration in infinitely many variables: decomposition, multilevel and fixed truncation.

The integrand is prod_j (1 + gamma_j g(x_j)) with a mean-zero g, so its integral is 1.
Run:  python3 demos/infinite_dimensional.py
"""
import math

from rkhs_qmc.idim_integration import (
    fit_rate,
    fixed_subspace_integrate,
    mdm_integrate,
    mdm_plan,
    multilevel_integrate,
    multilevel_plan,
    product_test_integrand,
    theoretical_lambda,
)
from rkhs_qmc.univariate_spaces import NormFlavor, UnivariateSpace
from rkhs_qmc.weights import polynomial


def main() -> None:
    space = UnivariateSpace(NormFlavor.anchored(0.0), 1)
    weights = polynomial(4)
    f = product_test_integrand(weights)
    budgets = [2.0**k for k in range(6, 15, 2)]
    for name, model in (("decomposition (unr cost)", "unr"), ("multilevel (nest cost)", "nest")):
        pairs = []
        for budget in budgets:
            if model == "unr":
                res = mdm_integrate(f, mdm_plan(weights, space, budget), space)
            else:
                res = multilevel_integrate(f, multilevel_plan(weights, space, budget), space, weights)
            pairs.append((res.cost, abs(res.estimate - 1.0)))
            print(f"{name:<26} budget {budget:>7.0f}  cost {res.cost:>8.0f}  error {pairs[-1][1]:.3e}")
        bracket = theoretical_lambda("det", model, 1, weights.decay())
        print(f"  fitted exponent {fit_rate(pairs)[0]:.3f}, known bracket [{bracket.lower:g}, {bracket.upper:g}]\n")

    offset = product_test_integrand(polynomial(2.05), "offset")
    print("fixed truncation: bias of dropping the tail at the default value")
    for s in (1, 4, 16, 64):
        res = fixed_subspace_integrate(offset, s, 2**10, space, polynomial(3), "ran", seed=1)
        print(f"  s = {s:>3}: estimate {res.estimate:.5f}  error {abs(res.estimate - 1):.2e}  cost {res.cost:.0f}")
    print(f"  known exponent for decay 3: {theoretical_lambda('ran', 'fix', 1, 3.0).lower:g}")


if __name__ == "__main__":
    main()
