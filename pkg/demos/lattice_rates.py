"""Worst-case error of CBC polynomial lattice rules as n grows, deterministic and scrambled.

Run:  python3 demos/lattice_rates.py [--plot rates.svg]
"""
import argparse

from rkhs_qmc.cli_experiments import svg_loglog
from rkhs_qmc.idim_integration import fit_rate
from rkhs_qmc.qmc_rules import cbc_construct, scrambled_wce, wce
from rkhs_qmc.tensor_spaces import ProductKernel
from rkhs_qmc.univariate_spaces import NormFlavor, UnivariateSpace
from rkhs_qmc.weights import polynomial


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--dims", type=int, default=4)
    parser.add_argument("--m-max", type=int, default=11)
    parser.add_argument("--plot")
    args = parser.parse_args()

    kernel = ProductKernel(UnivariateSpace(NormFlavor.anchored(0.0), 1), polynomial(3), args.dims)
    det, ran = [], []
    print(f"{'n':>6} {'wce':>12} {'scrambled':>12}")
    for m in range(4, args.m_max + 1):
        lat = cbc_construct(2, m, args.dims, kernel)
        scr = cbc_construct(2, m, args.dims, kernel, criterion="scrambled")
        det.append((lat.n, wce(lat.rule(), kernel)))
        ran.append((scr.n, scrambled_wce(scr, kernel)))
        print(f"{lat.n:>6} {det[-1][1]:>12.4e} {ran[-1][1]:>12.4e}")
    print(f"fitted slopes: deterministic {fit_rate(det)[0]:.3f}, scrambled {fit_rate(ran)[0]:.3f}")
    if args.plot:
        with open(args.plot, "w") as fh:
            fh.write(svg_loglog([("deterministic", det), ("scrambled", ran)], "n", "worst-case error"))


if __name__ == "__main__":
    main()
