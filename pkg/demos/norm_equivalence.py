"""How far apart the Anchored, ANOVA and Standard norms are, in one variable and in products.

Run:  python3 demos/norm_equivalence.py
"""
from rkhs_qmc.embeddings import defective_norm_counterexample, uniform_bound_sweep
from rkhs_qmc.univariate_spaces import NormFlavor, UnivariateSpace, equivalence_constant
from rkhs_qmc.weights import polynomial

FLAVORS = ["anchored:0", "anova", "standard"]


def main() -> None:
    print("univariate equivalence constants c (r = 1) and the weight factor c0 = 1/(2 c^4)")
    for a in FLAVORS:
        for b in FLAVORS:
            if a != b:
                c, c0 = equivalence_constant(UnivariateSpace(NormFlavor.parse(a), 1), UnivariateSpace(NormFlavor.parse(b), 1))
                print(f"  {a:>10} vs {b:<10} c = {c:.6f}  c0 = {c0:.6f}")

    weights = polynomial(2, scale=0.5)
    fi, fii = NormFlavor.anchored(0.0), NormFlavor.anova()
    _, c0 = equivalence_constant(UnivariateSpace(fi, 1), UnivariateSpace(fii, 1))
    print(f"\nembedding norms between anchored and ANOVA products, weights {weights.describe()}")
    for row in uniform_bound_sweep(fi, fii, 1, weights, c0, 4):
        norms = " ".join(f"{v:.5f}" for v in row.norms())
        print(f"  s = {row.s}: {norms}  (budget {row.budget:.5f})")

    print("\ndropping the lower derivatives from the Standard norm breaks the equivalence (r = 2):")
    for s in range(1, 7):
        lhs, rhs = defective_norm_counterexample(2, polynomial(2), s)
        print(f"  s = {s}: defective {lhs:g}, full {rhs:g}")


if __name__ == "__main__":
    main()
